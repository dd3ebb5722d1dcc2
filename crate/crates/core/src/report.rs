//! On-disk decomposition reports: a JSON schema with one entry per
//! solution, each term carrying its two linear forms and the output
//! coefficients, plus an optional stats block and a text renderer for
//! human-readable formulae.

use serde::{Deserialize, Serialize};

use crate::bilinear::{Decomposition, RankOneForm};
use crate::error::{Error, Result};
use crate::search::SearchStats;
use crate::targets::TargetMap;

/// Bitstrings are written index 0 first: character `i` is coordinate `i`.
pub fn bits_to_string(bits: u64, len: usize) -> String {
    (0..len).map(|i| if bits >> i & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn string_to_bits(s: &str, len: usize) -> Result<u64> {
    if s.len() != len || !s.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(Error::Schema(format!("bad bitstring `{s}` (want {len} binary digits)")));
    }
    Ok(s.bytes().enumerate().fold(0u64, |acc, (i, b)| acc | (((b - b'0') as u64) << i)))
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct TermEntry {
    pub alpha: String,
    pub beta: String,
    pub coeffs: String,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct SolutionEntry {
    pub terms: Vec<TermEntry>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct StatsEntry {
    pub tests: u64,
    pub per_depth: Vec<u64>,
    pub seconds: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct DecompositionFile {
    pub target: String,
    pub m: usize,
    pub n: usize,
    pub ell: usize,
    pub rank: usize,
    pub field: String,
    pub solutions: Vec<SolutionEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<StatsEntry>,
}

impl DecompositionFile {
    pub fn from_run(
        target: &TargetMap,
        rank: usize,
        decompositions: &[Decomposition],
        stats: Option<&SearchStats>,
    ) -> Self {
        let solutions = decompositions
            .iter()
            .map(|d| SolutionEntry {
                terms: d
                    .terms
                    .iter()
                    .enumerate()
                    .map(|(t, term)| TermEntry {
                        alpha: bits_to_string(term.alpha, target.m),
                        beta: bits_to_string(term.beta, target.n),
                        coeffs: bits_to_string(d.term_coeffs(t), target.dim()),
                    })
                    .collect(),
            })
            .collect();
        DecompositionFile {
            target: target.id.to_string(),
            m: target.m,
            n: target.n,
            ell: target.dim(),
            rank,
            field: "GF2".into(),
            solutions,
            stats: stats.map(|s| StatsEntry {
                tests: s.rank_one_basis_calls,
                per_depth: s.per_depth_calls.clone(),
                seconds: s.wall_time.as_secs_f64(),
            }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    /// Rebuild the in-memory decompositions, validating shapes.
    pub fn decompositions(&self) -> Result<Vec<Decomposition>> {
        self.solutions
            .iter()
            .map(|sol| {
                let mut terms = Vec::with_capacity(sol.terms.len());
                let mut coeff_rows = vec![0u64; self.ell];
                for (t, term) in sol.terms.iter().enumerate() {
                    let alpha = string_to_bits(&term.alpha, self.m)?;
                    let beta = string_to_bits(&term.beta, self.n)?;
                    if alpha == 0 || beta == 0 {
                        return Err(Error::Schema("zero linear form in a term".into()));
                    }
                    terms.push(RankOneForm::new(self.m, self.n, alpha, beta));
                    let c = string_to_bits(&term.coeffs, self.ell)?;
                    for (h, row) in coeff_rows.iter_mut().enumerate() {
                        *row |= (c >> h & 1) << t;
                    }
                }
                Ok(Decomposition { terms, coeff_rows })
            })
            .collect()
    }

    /// Re-check every recorded decomposition against the named target.
    /// Returns `(passed, failed)` counts.
    pub fn verify(&self) -> Result<(usize, usize)> {
        let target = TargetMap::parse(&self.target)?;
        if target.m != self.m || target.n != self.n || target.dim() != self.ell {
            return Err(Error::Schema("target shape mismatch".into()));
        }
        let mut passed = 0;
        let mut failed = 0;
        for d in self.decompositions()? {
            if d.rank() == self.rank && crate::bilinear::verify_decomposition(&target.basis, &d) {
                passed += 1;
            } else {
                failed += 1;
            }
        }
        Ok((passed, failed))
    }

    /// Deterministic plain-text rendering: each solution lists its products
    /// and the recombination of every output coefficient.
    pub fn to_formulae_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# {} over GF(2): rank {}, {} solution(s)\n",
            self.target,
            self.rank,
            self.solutions.len()
        ));
        for (s, sol) in self.solutions.iter().enumerate() {
            out.push_str(&format!("solution {s}\n"));
            for (t, term) in sol.terms.iter().enumerate() {
                let lhs = linear_comb(&term.alpha, 'a');
                let rhs = linear_comb(&term.beta, 'b');
                out.push_str(&format!("  p{t} = ({lhs}) * ({rhs})\n"));
            }
            for h in 0..self.ell {
                let used: Vec<String> = sol
                    .terms
                    .iter()
                    .enumerate()
                    .filter(|(_, term)| term.coeffs.as_bytes()[h] == b'1')
                    .map(|(t, _)| format!("p{t}"))
                    .collect();
                let rhs = if used.is_empty() { "0".to_string() } else { used.join(" + ") };
                out.push_str(&format!("  c{h} = {rhs}\n"));
            }
        }
        out
    }
}

fn linear_comb(bits: &str, var: char) -> String {
    let terms: Vec<String> = bits
        .bytes()
        .enumerate()
        .filter(|(_, b)| *b == b'1')
        .map(|(i, _)| format!("{var}{i}"))
        .collect();
    terms.join(" + ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{bdez, decompose_all, SolutionSet};

    fn karatsuba_file() -> DecompositionFile {
        let target = crate::targets::poly_product(2).unwrap();
        let (sols, stats) = bdez(&target.space, 3);
        let decomps = decompose_all(&sols, &target).unwrap();
        DecompositionFile::from_run(&target, 3, &decomps, Some(&stats))
    }

    #[test]
    fn round_trip_and_verify() {
        let file = karatsuba_file();
        let json = file.to_json();
        let back = DecompositionFile::from_json(&json).unwrap();
        assert_eq!(back.to_json(), json);
        let (passed, failed) = back.verify().unwrap();
        assert_eq!((passed, failed), (1, 0));
    }

    #[test]
    fn corrupt_coefficient_fails() {
        let mut file = karatsuba_file();
        let c = &mut file.solutions[0].terms[0].coeffs;
        let flipped = if c.as_bytes()[0] == b'1' { "0" } else { "1" };
        c.replace_range(0..1, flipped);
        let (_, failed) = file.verify().unwrap();
        assert_eq!(failed, 1);
    }

    #[test]
    fn formulae_contain_the_split_product()
 {
        let file = karatsuba_file();
        let text = file.to_formulae_text();
        assert!(text.contains("(a0 + a1) * (b0 + b1)"), "{text}");
        // an empty solution set still renders a header
        let target = crate::targets::poly_product(2).unwrap();
        let empty = DecompositionFile::from_run(&target, 2, &[], None);
        assert!(empty.to_formulae_text().starts_with("# poly:2"));
        let _ = SolutionSet::default();
    }

    #[test]
    fn bitstring_order_is_index_zero_first() {
        assert_eq!(bits_to_string(0b01, 2), "10");
        assert_eq!(string_to_bits("10", 2).unwrap(), 0b01);
        assert!(string_to_bits("2", 1).is_err());
    }
}
