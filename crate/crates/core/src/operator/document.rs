//! Plain-text operator spec documents.
//!
//! ```text
//! [meta]
//! d=2
//! t_lo=0
//! t_hi=10
//! [params]
//! psi=1
//! [diffusion]
//! q11=1+psi*x2^2
//! q12=-psi*x1*x2
//! q22=1+psi*x1^2
//! [drift]
//! b1=-3*x1*norm2(x)
//! b2=-3*x2*norm2(x)
//! [ellipticity]
//! eta=1
//! [lyapunov]
//! phi=1+norm2(x)
//! gamma=6
//! ```
//!
//! Lines starting with `#` are comments. Parameters are expressions in `t`
//! and earlier parameters; they are substituted into every other formula.

use std::fmt::Write as _;

use super::SpecError;

#[derive(Debug, Clone, PartialEq)]
pub struct SpecDocument {
    pub dimension: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    /// Ordered `name = expression` pairs.
    pub params: Vec<(String, String)>,
    /// Zero-based `(i, j)` entries as written (either triangle).
    pub diffusion: Vec<((usize, usize), String)>,
    /// Zero-based component index and expression.
    pub drift: Vec<(usize, String)>,
    /// User-supplied ellipticity function.
    pub eta: Option<String>,
    pub lyapunov: Option<LyapunovSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSpec {
    pub phi: String,
    pub gamma: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Meta,
    Params,
    Diffusion,
    Drift,
    Ellipticity,
    Lyapunov,
}

impl SpecDocument {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let mut section = Section::None;
        let mut dimension = None;
        let mut t_lo = None;
        let mut t_hi = None;
        let mut params = Vec::new();
        let mut diffusion = Vec::new();
        let mut drift = Vec::new();
        let mut eta = None;
        let mut phi = None;
        let mut lyap_gamma = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let format_err = |message: String| SpecError::Format { line, message };
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = match name.trim() {
                    "meta" => Section::Meta,
                    "params" => Section::Params,
                    "diffusion" => Section::Diffusion,
                    "drift" => Section::Drift,
                    "ellipticity" => Section::Ellipticity,
                    "lyapunov" => Section::Lyapunov,
                    other => return Err(format_err(format!("unknown section [{other}]"))),
                };
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| format_err(format!("expected key=value, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim().to_string());
            let real = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| format_err(format!("`{key}` expects a real number, got `{v}`")))
            };
            match section {
                Section::None => {
                    return Err(format_err("key outside of any section".into()));
                }
                Section::Meta => match key {
                    "d" => {
                        let d: usize = value
                            .parse()
                            .map_err(|_| format_err(format!("bad dimension `{value}`")))?;
                        if d == 0 {
                            return Err(format_err("dimension must be at least 1".into()));
                        }
                        dimension = Some(d);
                    }
                    "t_lo" => t_lo = Some(real(&value)?),
                    "t_hi" => t_hi = Some(real(&value)?),
                    _ => return Err(format_err(format!("unknown meta key `{key}`"))),
                },
                Section::Params => {
                    if !is_identifier(key) {
                        return Err(format_err(format!("bad parameter name `{key}`")));
                    }
                    params.push((key.to_string(), value));
                }
                Section::Diffusion => {
                    let d = dimension.ok_or_else(|| format_err("[meta] d must come first".into()))?;
                    let idx = entry_indices(key, 'q', d)
                        .ok_or_else(|| format_err(format!("bad diffusion entry `{key}`")))?;
                    diffusion.push((idx, value));
                }
                Section::Drift => {
                    let d = dimension.ok_or_else(|| format_err("[meta] d must come first".into()))?;
                    let i = key
                        .strip_prefix('b')
                        .and_then(|s| s.parse::<usize>().ok())
                        .filter(|i| (1..=d).contains(i))
                        .ok_or_else(|| format_err(format!("bad drift entry `{key}`")))?;
                    drift.push((i - 1, value));
                }
                Section::Ellipticity => match key {
                    "eta" => eta = Some(value),
                    _ => return Err(format_err(format!("unknown ellipticity key `{key}`"))),
                },
                Section::Lyapunov => match key {
                    "phi" => phi = Some(value),
                    "gamma" => lyap_gamma = Some(real(&value)?),
                    _ => return Err(format_err(format!("unknown lyapunov key `{key}`"))),
                },
            }
        }

        let dimension = dimension.ok_or(SpecError::Missing("[meta] d"))?;
        let t_lo = t_lo.unwrap_or(f64::NEG_INFINITY);
        let t_hi = t_hi.ok_or(SpecError::Missing("[meta] t_hi"))?;
        if t_lo.is_nan() || t_hi.is_nan() || !(t_lo < t_hi) {
            return Err(SpecError::Format {
                line: 0,
                message: format!("empty time interval ({t_lo}, {t_hi}]"),
            });
        }
        let lyapunov = match (phi, lyap_gamma) {
            (None, None) => None,
            (Some(phi), Some(gamma)) => Some(LyapunovSpec { phi, gamma }),
            (Some(_), None) => return Err(SpecError::Missing("[lyapunov] gamma")),
            (None, Some(_)) => return Err(SpecError::Missing("[lyapunov] phi")),
        };
        Ok(SpecDocument {
            dimension,
            t_lo,
            t_hi,
            params,
            diffusion,
            drift,
            eta,
            lyapunov,
        })
    }

    /// Renders back to the text format.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let sep = if self.dimension > 9 { "_" } else { "" };
        let _ = writeln!(s, "[meta]\nd={}", self.dimension);
        if self.t_lo.is_finite() {
            let _ = writeln!(s, "t_lo={}", self.t_lo);
        }
        let _ = writeln!(s, "t_hi={}", self.t_hi);
        if !self.params.is_empty() {
            s.push_str("[params]\n");
            for (k, v) in &self.params {
                let _ = writeln!(s, "{k}={v}");
            }
        }
        s.push_str("[diffusion]\n");
        for ((i, j), v) in &self.diffusion {
            let _ = writeln!(s, "q{}{sep}{}={v}", i + 1, j + 1);
        }
        s.push_str("[drift]\n");
        for (i, v) in &self.drift {
            let _ = writeln!(s, "b{}={v}", i + 1);
        }
        if let Some(eta) = &self.eta {
            let _ = writeln!(s, "[ellipticity]\neta={eta}");
        }
        if let Some(l) = &self.lyapunov {
            let _ = writeln!(s, "[lyapunov]\nphi={}\ngamma={}", l.phi, l.gamma);
        }
        s
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// `q12` (dimension <= 9) or `q1_2`, one-based, to zero-based indices.
fn entry_indices(key: &str, prefix: char, d: usize) -> Option<(usize, usize)> {
    let rest = key.strip_prefix(prefix)?;
    let (i, j) = if let Some((a, b)) = rest.split_once('_') {
        (a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)
    } else if rest.len() == 2 && d <= 9 {
        let b = rest.as_bytes();
        if !b.iter().all(u8::is_ascii_digit) {
            return None;
        }
        ((b[0] - b'0') as usize, (b[1] - b'0') as usize)
    } else {
        return None;
    };
    if (1..=d).contains(&i) && (1..=d).contains(&j) {
        Some((i - 1, j - 1))
    } else {
        None
    }
}
