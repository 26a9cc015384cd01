//! Diagnosis-code records: fixed-width encoding, synthesis, CSV output.
//!
//! An admission is a set of numeric diagnosis codes; its model input is a
//! binary vector with one slot per code in a 1-indexed space of
//! [`CODE_SPACE`] codes. A code beyond the space keeps its first three
//! decimal digits (the coarse category), so specific variants of a
//! condition collapse onto their category slot; codes already inside the
//! space are used as-is. Duplicate codes collapse — the vector records
//! membership, not multiplicity.
//!
//! The synthesizer draws records with prescribed per-code marginal
//! prevalences and pairwise comorbidity lifts. For a pair `(a, b)` with
//! lift `L`, the conditional is `P[b | a] = L P[b | not a]`, and the
//! unconditional rate is preserved by compensation:
//! `P[b | not a] = m_b / (1 + (L - 1) m_a)`, keeping `E[b] = m_b` exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ndnum::{Matrix, RngStream};

/// Number of code slots in an encoded record.
pub const CODE_SPACE: usize = 1071;

/// Encode one admission's diagnosis codes as a binary membership vector of
/// length [`CODE_SPACE`].
pub fn encode_admission(codes: &[u32]) -> Result<Vec<f64>> {
    let mut v = vec![0.0; CODE_SPACE];
    for &code in codes {
        if code == 0 {
            return Err(Error::Data(
                "diagnosis code 0 is not a valid 1-indexed code".to_string(),
            ));
        }
        let mut c = code;
        if c as usize > CODE_SPACE {
            while c > 999 {
                c /= 10;
            }
        }
        v[(c - 1) as usize] = 1.0;
    }
    Ok(v)
}

/// One comorbidity pair: observing code `a` multiplies the conditional
/// rate of code `b` by `lift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComorbidPair {
    a: u32,
    b: u32,
    lift: f64,
}

/// Marginal prevalences plus pairwise comorbidity structure.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthEhrModel {
    marginals: Vec<f64>,
    pairs: Vec<ComorbidPair>,
}

impl SynthEhrModel {
    /// Build a model from per-code marginals (length [`CODE_SPACE`], values
    /// in `[0, 1]`) and comorbidity pairs given as `(a, b, lift)` with
    /// 1-indexed codes.
    ///
    /// Each code may participate in at most one pair, `a != b`, lifts are
    /// nonnegative, and the compensated conditional `P[b | a]` must not
    /// exceed 1 — the construction fails otherwise rather than silently
    /// clamping.
    pub fn new(marginals: Vec<f64>, pairs: Vec<(u32, u32, f64)>) -> Result<Self> {
        if marginals.len() != CODE_SPACE {
            return Err(Error::Shape(format!(
                "{} marginals for a {CODE_SPACE}-code space",
                marginals.len()
            )));
        }
        for (i, &m) in marginals.iter().enumerate() {
            if !(0.0..=1.0).contains(&m) || !m.is_finite() {
                return Err(Error::Parameter(format!(
                    "marginal for code {} is {m}, outside [0, 1]",
                    i + 1
                )));
            }
        }
        let mut used = vec![false; CODE_SPACE + 1];
        let mut checked = Vec::with_capacity(pairs.len());
        for (a, b, lift) in pairs {
            if a == 0 || b == 0 || a as usize > CODE_SPACE || b as usize > CODE_SPACE {
                return Err(Error::Parameter(format!(
                    "pair ({a}, {b}) uses codes outside 1..={CODE_SPACE}"
                )));
            }
            if a == b {
                return Err(Error::Parameter(format!(
                    "pair ({a}, {b}) relates a code to itself"
                )));
            }
            if used[a as usize] || used[b as usize] {
                return Err(Error::Parameter(format!(
                    "pair ({a}, {b}) reuses a code already in another pair"
                )));
            }
            used[a as usize] = true;
            used[b as usize] = true;
            if !lift.is_finite() || lift < 0.0 {
                return Err(Error::Parameter(format!(
                    "pair ({a}, {b}) has invalid lift {lift}"
                )));
            }
            let m_a = marginals[(a - 1) as usize];
            let m_b = marginals[(b - 1) as usize];
            let base = m_b / (1.0 + (lift - 1.0) * m_a);
            if lift * base > 1.0 {
                return Err(Error::Parameter(format!(
                    "pair ({a}, {b}) with lift {lift} needs conditional rate {:.4} > 1",
                    lift * base
                )));
            }
            checked.push(ComorbidPair { a, b, lift });
        }
        Ok(Self {
            marginals,
            pairs: checked,
        })
    }

    /// A small demonstration model: a handful of common chronic-condition
    /// codes at realistic prevalences over a sparse background, with two
    /// comorbidity pairs.
    pub fn demo() -> Self {
        let mut marginals = vec![0.01; CODE_SPACE];
        for (code, m) in [(401u32, 0.30), (250, 0.20), (414, 0.15), (272, 0.25), (428, 0.10)] {
            marginals[(code - 1) as usize] = m;
        }
        Self::new(marginals, vec![(401, 414, 2.0), (250, 272, 1.8)])
            .expect("demonstration model parameters are valid")
    }

    pub fn marginals(&self) -> &[f64] {
        &self.marginals
    }

    pub fn pairs(&self) -> &[ComorbidPair] {
        &self.pairs
    }

    /// Parse a model description. One statement per line:
    ///
    /// ```text
    /// # marginal prevalence of one code
    /// 401 = 0.30
    /// # comorbidity: second code, lifted when the first is present
    /// pair = 401 414 2.0
    /// ```
    ///
    /// `#` starts a comment; codes not listed have prevalence 0.
    pub fn parse_model(text: &str) -> Result<Self> {
        let mut marginals = vec![0.0; CODE_SPACE];
        let mut seen = vec![false; CODE_SPACE + 1];
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("expected `code = rate` or `pair = a b lift`, got {content:?}"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key == "pair" {
                let fields: Vec<&str> = value.split_whitespace().collect();
                if fields.len() != 3 {
                    return Err(Error::Config {
                        line: line_no,
                        message: format!("pair needs `a b lift`, got {value:?}"),
                    });
                }
                let parse = |what: &str, s: &str| -> Result<f64> {
                    s.parse().map_err(|_| Error::Config {
                        line: line_no,
                        message: format!("cannot parse pair {what} {s:?}"),
                    })
                };
                let a: u32 = fields[0].parse().map_err(|_| Error::Config {
                    line: line_no,
                    message: format!("cannot parse pair code {:?}", fields[0]),
                })?;
                let b: u32 = fields[1].parse().map_err(|_| Error::Config {
                    line: line_no,
                    message: format!("cannot parse pair code {:?}", fields[1]),
                })?;
                let lift = parse("lift", fields[2])?;
                pairs.push((a, b, lift));
            } else {
                let code: u32 = key.parse().map_err(|_| Error::Config {
                    line: line_no,
                    message: format!("expected a numeric code or `pair`, got {key:?}"),
                })?;
                if code == 0 || code as usize > CODE_SPACE {
                    return Err(Error::Config {
                        line: line_no,
                        message: format!("code {code} is outside 1..={CODE_SPACE}"),
                    });
                }
                if seen[code as usize] {
                    return Err(Error::Config {
                        line: line_no,
                        message: format!("code {code} listed twice"),
                    });
                }
                seen[code as usize] = true;
                let rate: f64 = value.parse().map_err(|_| Error::Config {
                    line: line_no,
                    message: format!("cannot parse rate {value:?}"),
                })?;
                marginals[(code - 1) as usize] = rate;
            }
        }
        Self::new(marginals, pairs)
    }

    /// Parse a model description file from disk.
    pub fn load_model(path: &Path) -> Result<Self> {
        Self::parse_model(&std::fs::read_to_string(path)?)
    }
}

/// Sample `n` records from the model. Each record draws every code once in
/// ascending order — pair targets last, conditioned on their partner —
/// so the draw sequence is a pure function of the stream state.
pub fn synthesize_ehr(model: &SynthEhrModel, n: usize, stream: &mut RngStream) -> Matrix {
    let mut is_pair_target = vec![false; CODE_SPACE + 1];
    for p in &model.pairs {
        is_pair_target[p.b as usize] = true;
    }
    let mut out = Matrix::zeros(n, CODE_SPACE);
    for i in 0..n {
        // Independent codes (including every pair's `a`) first, ascending.
        for code in 1..=CODE_SPACE {
            if is_pair_target[code] {
                continue;
            }
            let m = model.marginals[code - 1];
            if stream.next_uniform() <= m {
                out.set(i, code - 1, 1.0);
            }
        }
        // Pair targets, ascending, conditioned on the drawn partner.
        for p in &model.pairs {
            let m_a = model.marginals[(p.a - 1) as usize];
            let m_b = model.marginals[(p.b - 1) as usize];
            let base = m_b / (1.0 + (p.lift - 1.0) * m_a);
            let a_present = out.get(i, (p.a - 1) as usize) == 1.0;
            let rate = if a_present { p.lift * base } else { base };
            if stream.next_uniform() <= rate {
                out.set(i, (p.b - 1) as usize, 1.0);
            }
        }
    }
    out
}

/// Write binary records as CSV: a header of the 1-indexed code numbers,
/// then one 0/1 row per record (values thresholded at 0.5). An empty
/// record set produces just the header line.
pub fn write_ehr_csv(path: &Path, records: &Matrix) -> Result<()> {
    if records.cols() != CODE_SPACE {
        return Err(Error::Shape(format!(
            "records have {} columns, the code space needs {CODE_SPACE}",
            records.cols()
        )));
    }
    let mut writer = BufWriter::new(File::create(path)?);
    let header: Vec<String> = (1..=CODE_SPACE).map(|c| c.to_string()).collect();
    writeln!(writer, "{}", header.join(","))?;
    let mut line = String::with_capacity(2 * CODE_SPACE);
    for i in 0..records.rows() {
        line.clear();
        for j in 0..CODE_SPACE {
            if j > 0 {
                line.push(',');
            }
            line.push(if records.get(i, j) >= 0.5 { '1' } else { '0' });
        }
        writeln!(writer, "{line}")?;
    }
    writer.flush()?;
    Ok(())
}

/// Read back a CSV written by [`write_ehr_csv`]: validates the header is
/// the full ascending code list and every cell is 0 or 1.
pub fn read_ehr_csv(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty file", path.display())))?;
    let expected_header: Vec<String> = (1..=CODE_SPACE).map(|c| c.to_string()).collect();
    if header != expected_header.join(",") {
        return Err(Error::Format(format!(
            "{}: header is not the ascending 1..={CODE_SPACE} code list",
            path.display()
        )));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut cells = 0;
        for cell in line.split(',') {
            match cell {
                "0" => values.push(0.0),
                "1" => values.push(1.0),
                other => {
                    return Err(Error::Format(format!(
                        "{}: line {}: cell {other:?} is not 0 or 1",
                        path.display(),
                        lineno + 2
                    )))
                }
            }
            cells += 1;
        }
        if cells != CODE_SPACE {
            return Err(Error::Format(format!(
                "{}: line {} has {cells} cells, expected {CODE_SPACE}",
                path.display(),
                lineno + 2
            )));
        }
        rows += 1;
    }
    Matrix::from_vec(rows, CODE_SPACE, values)
}


#[cfg(test)]
mod property_tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn encoding_is_binary_membership(
            codes in proptest::collection::vec(1u32..100_000, 0..20),
        ) {
            let v = encode_admission(&codes).unwrap();
            prop_assert_eq!(v.len(), CODE_SPACE);
            prop_assert!(v.iter().all(|&x| x == 0.0 || x == 1.0));
            let set: f64 = v.iter().sum();
            prop_assert!(set <= codes.len() as f64);
            if !codes.is_empty() {
                prop_assert!(set >= 1.0);
            }
        }

        #[test]
        fn synthesized_records_are_binary(seed in any::<u64>()) {
            let mut marginals = vec![0.0; CODE_SPACE];
            marginals[0] = 0.5;
            marginals[5] = 0.25;
            let model = SynthEhrModel::new(marginals, vec![(1, 6, 1.5)]).unwrap();
            let mut stream = RngStream::new(seed, 2);
            let records = synthesize_ehr(&model, 8, &mut stream);
            for &x in records.data() {
                prop_assert!(x == 0.0 || x == 1.0);
            }
        }
    }
}
