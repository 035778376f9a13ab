//! Report types and their text/CSV serializations.
//!
//! All floats are written with 17 significant digits so that a CSV file
//! identifies the `f64` it came from.

use std::fmt::{self, Write as _};

use crate::operator::EtaMode;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Outcome of one sampled hypothesis check.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub condition: String,
    pub pass: bool,
    pub extremal_value: f64,
    pub witness_t: f64,
    pub witness_x: Vec<f64>,
    pub samples: usize,
    pub tolerance: f64,
    pub eta_mode: Option<EtaMode>,
    pub seed: Option<u64>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn csv_header(dimension: usize) -> String {
        let mut s = String::from("condition,pass,extremal,t");
        for i in 1..=dimension {
            let _ = write!(s, ",x{i}");
        }
        s.push_str(",samples,tol,eta_mode,seed");
        s
    }

    pub fn csv_row(&self) -> String {
        let mut s = format!(
            "{},{},{},{}",
            self.condition,
            self.pass,
            fmt_f64(self.extremal_value),
            fmt_f64(self.witness_t)
        );
        for v in &self.witness_x {
            let _ = write!(s, ",{}", fmt_f64(*v));
        }
        let _ = write!(
            s,
            ",{},{},{},{}",
            self.samples,
            fmt_f64(self.tolerance),
            self.eta_mode.map(|m| m.to_string()).unwrap_or_default(),
            self.seed.map(|s| s.to_string()).unwrap_or_default()
        );
        s
    }

    /// Line-oriented `key=value` block.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "condition={}", self.condition);
        let _ = writeln!(s, "pass={}", self.pass);
        let _ = writeln!(s, "extremal={}", fmt_f64(self.extremal_value));
        let _ = writeln!(s, "witness_t={}", fmt_f64(self.witness_t));
        let _ = writeln!(s, "witness_x={}", join(&self.witness_x));
        let _ = writeln!(s, "samples={}", self.samples);
        let _ = writeln!(s, "tol={}", fmt_f64(self.tolerance));
        if let Some(m) = self.eta_mode {
            let _ = writeln!(s, "eta_mode={m}");
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed={seed}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "note={n}");
        }
        s
    }
}

/// Writes a header plus one row per report.
pub fn conditions_csv(dimension: usize, reports: &[ConditionReport]) -> String {
    let mut s = ConditionReport::csv_header(dimension);
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerificationKind {
    Gradient,
    Bernstein,
    Bakry,
    Necessity,
    MaxPrinciple,
}

impl fmt::Display for VerificationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerificationKind::Gradient => "gradient",
            VerificationKind::Bernstein => "bernstein",
            VerificationKind::Bakry => "bakry",
            VerificationKind::Necessity => "necessity",
            VerificationKind::MaxPrinciple => "max-principle",
        })
    }
}

/// Worst margin of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMargin {
    pub time: f64,
    pub sup_margin: f64,
    pub witness_x: Vec<f64>,
}

/// Outcome of an inequality check: `worst_margin` is the largest value of
/// `left side - right side` seen, so `<= 0` means the inequality held.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub kind: VerificationKind,
    pub pass: bool,
    pub worst_margin: f64,
    pub witness_t: f64,
    pub witness_x: Vec<f64>,
    pub tolerance: f64,
    pub series: Vec<SnapshotMargin>,
    /// Echoed run parameters, in insertion order.
    pub parameters: Vec<(String, String)>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "kind={}", self.kind);
        let _ = writeln!(s, "pass={}", self.pass);
        let _ = writeln!(s, "worst_margin={}", fmt_f64(self.worst_margin));
        let _ = writeln!(s, "witness_t={}", fmt_f64(self.witness_t));
        let _ = writeln!(s, "witness_x={}", join(&self.witness_x));
        let _ = writeln!(s, "tol={}", fmt_f64(self.tolerance));
        for (k, v) in &self.parameters {
            let _ = writeln!(s, "{k}={v}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "note={n}");
        }
        s
    }

    /// Per-snapshot CSV: `time,sup_margin,x1..xd`.
    pub fn margins_csv(&self) -> String {
        let d = self.witness_x.len();
        let mut s = String::from("kind,time,sup_margin");
        for i in 1..=d {
            let _ = write!(s, ",x{i}");
        }
        s.push('\n');
        self.append_margin_rows(&mut s);
        s
    }

    pub fn append_margin_rows(&self, s: &mut String) {
        for row in &self.series {
            let _ = write!(s, "{},{},{}", self.kind, fmt_f64(row.time), fmt_f64(row.sup_margin));
            for v in &row.witness_x {
                let _ = write!(s, ",{}", fmt_f64(*v));
            }
            s.push('\n');
        }
    }
}

/// Running maximum with a deterministic witness: ties go to the
/// lexicographically smallest `(t, x)`.
#[derive(Debug, Clone)]
pub struct Extremum {
    pub value: f64,
    pub t: f64,
    pub x: Vec<f64>,
}

impl Extremum {
    pub fn new(value: f64, t: f64, x: Vec<f64>) -> Self {
        Extremum { value, t, x }
    }

    fn point_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.t.total_cmp(&other.t).then_with(|| {
            for (a, b) in self.x.iter().zip(&other.x) {
                match a.total_cmp(b) {
                    std::cmp::Ordering::Equal => continue,
                    o => return o,
                }
            }
            std::cmp::Ordering::Equal
        })
    }

    /// Whether `self` should replace `best` in a max-reduction.
    pub fn beats_max(&self, best: &Self) -> bool {
        match self.value.total_cmp(&best.value) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => self.point_cmp(best).is_lt(),
        }
    }

    /// Whether `self` should replace `best` in a min-reduction.
    pub fn beats_min(&self, best: &Self) -> bool {
        match self.value.total_cmp(&best.value) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => self.point_cmp(best).is_lt(),
        }
    }
}

/// Max-reduction of candidates, independent of their order.
pub fn argmax(items: impl IntoIterator<Item = Extremum>) -> Option<Extremum> {
    items.into_iter().fold(None, |best, e| match best {
        Some(b) if !e.beats_max(&b) => Some(b),
        _ => Some(e),
    })
}

/// Min-reduction of candidates, independent of their order.
pub fn argmin(items: impl IntoIterator<Item = Extremum>) -> Option<Extremum> {
    items.into_iter().fold(None, |best, e| match best {
        Some(b) if !e.beats_min(&b) => Some(b),
        _ => Some(e),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        let v = std::f64::consts::PI;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn ties_go_to_smallest_point() {
        let a = Extremum::new(1.0, 0.0, vec![1.0, 0.0]);
        let b = Extremum::new(1.0, 0.0, vec![0.0, 5.0]);
        let c = Extremum::new(0.5, -1.0, vec![0.0, 0.0]);
        let best = argmax([a.clone(), b.clone(), c.clone()]).unwrap();
        assert_eq!(best.x, vec![0.0, 5.0]);
        let best = argmax([c.clone(), b, a]).unwrap();
        assert_eq!(best.x, vec![0.0, 5.0]);
        assert_eq!(argmin([c]).unwrap().t, -1.0);
    }

    #[test]
    fn csv_layout() {
        let r = ConditionReport {
            condition: "ellipticity".into(),
            pass: true,
            extremal_value: 1.0,
            witness_t: 1.0,
            witness_x: vec![0.0, 0.5],
            samples: 10,
            tolerance: 0.0,
            eta_mode: Some(EtaMode::LambdaMin),
            seed: Some(42),
            notes: vec![],
        };
        assert_eq!(
            ConditionReport::csv_header(2),
            "condition,pass,extremal,t,x1,x2,samples,tol,eta_mode,seed"
        );
        assert_eq!(r.csv_row().split(',').count(), 10);
        assert!(r.csv_row().ends_with(",10,0.0000000000000000e0,lambda-min,42"));
        assert!(r.to_kv().contains("pass=true\n"));
    }
}
