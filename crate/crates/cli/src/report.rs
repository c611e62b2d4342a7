//! Flat `key = value` report rendering and exact float round-tripping.
//!
//! Reports carry full-precision decimal floats (Rust's shortest
//! round-trip formatting). Certificates additionally render every matrix
//! entry as raw IEEE-754 bits, so a saved certificate reloads bit-exactly.

use crate::CliError;
use ratesync_core::lurie::LurieSystem;
use ratesync_core::nalgebra::DMatrix;
use ratesync_core::passify::PassificationCertificate;

/// Shortest decimal that round-trips to the same f64.
pub fn fmt_float(v: f64) -> String {
    format!("{v}")
}

/// Hexadecimal IEEE-754 bit pattern, e.g. `0x3FB999999999999A`.
pub fn float_to_hex(v: f64) -> String {
    format!("0x{:016X}", v.to_bits())
}

pub fn float_from_hex(text: &str) -> Result<f64, CliError> {
    let raw = text
        .strip_prefix("0x")
        .or_else(|| text.strip_prefix("0X"))
        .ok_or_else(|| CliError::Config(format!("expected 0x-prefixed hex float, got `{text}`")))?;
    let bits = u64::from_str_radix(raw, 16)
        .map_err(|e| CliError::Config(format!("bad hex float `{text}`: {e}")))?;
    Ok(f64::from_bits(bits))
}

/// Render `key = value` lines.
pub fn render(pairs: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    out
}

pub fn kv(key: &str, value: impl Into<String>) -> (String, String) {
    (key.to_string(), value.into())
}

pub fn kv_float(key: &str, v: f64) -> (String, String) {
    (key.to_string(), fmt_float(v))
}

/// Serialize a certificate with hex-exact matrix entries. Decimal values are
/// attached as trailing comments for readability.
pub fn certificate_to_string(cert: &PassificationCertificate) -> String {
    let n = cert.p().nrows();
    let mut pairs = vec![
        kv("n", n.to_string()),
        kv("K", float_to_hex(cert.gain())),
        kv("eta", float_to_hex(cert.eta())),
    ];
    for i in 0..n {
        for j in 0..n {
            pairs.push(kv(
                &format!("P[{i}][{j}]"),
                format!(
                    "{} # {}",
                    float_to_hex(cert.p()[(i, j)]),
                    fmt_float(cert.p()[(i, j)])
                ),
            ));
        }
    }
    pairs.push(kv("lambda_min", float_to_hex(cert.lambda_min())));
    pairs.push(kv("residual_lmi", float_to_hex(cert.residual_lmi())));
    pairs.push(kv("residual_pb", float_to_hex(cert.residual_pb())));
    render(&pairs)
}

/// Reload a certificate saved by [`certificate_to_string`], re-verifying it
/// against the system.
pub fn certificate_from_str(
    text: &str,
    sys: &LurieSystem,
) -> Result<PassificationCertificate, CliError> {
    let mut entries = std::collections::BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("bad certificate line `{line}`")))?;
        let value = value.split('#').next().unwrap_or("").trim();
        entries.insert(key.trim().to_string(), value.to_string());
    }
    let n: usize = entries
        .get("n")
        .ok_or_else(|| CliError::Config("certificate missing n".into()))?
        .parse()
        .map_err(|e| CliError::Config(format!("bad n: {e}")))?;
    let gain = float_from_hex(
        entries
            .get("K")
            .ok_or_else(|| CliError::Config("certificate missing K".into()))?,
    )?;
    let eta = float_from_hex(
        entries
            .get("eta")
            .ok_or_else(|| CliError::Config("certificate missing eta".into()))?,
    )?;
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let key = format!("P[{i}][{j}]");
            let raw = entries
                .get(&key)
                .ok_or_else(|| CliError::Config(format!("certificate missing {key}")))?;
            p[(i, j)] = float_from_hex(raw)?;
        }
    }
    PassificationCertificate::from_parts(sys, p, gain, eta).map_err(CliError::from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ratesync_core::passify::find_certificate;

    #[test]
    fn hex_floats_roundtrip_exactly() {
        for v in [0.1, -0.0, 1e-300, std::f64::consts::PI, 122.2, f64::MAX] {
            assert_eq!(float_from_hex(&float_to_hex(v)).unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn decimal_floats_roundtrip_exactly() {
        for v in [0.1, 2.22, 1.0 / 3.0, 4.95, 1e-15] {
            let parsed: f64 = fmt_float(v).parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn certificate_roundtrip_is_bit_exact() {
        let sys = LurieSystem::chua(10.0, 15.6, 0.33, 0.945).unwrap();
        let cert = find_certificate(&sys, 10.0, 0.3).unwrap();
        let text = certificate_to_string(&cert);
        let reloaded = certificate_from_str(&text, &sys).unwrap();
        assert_eq!(cert.p(), reloaded.p());
        assert_eq!(cert.gain().to_bits(), reloaded.gain().to_bits());
        assert_eq!(cert.lambda_min().to_bits(), reloaded.lambda_min().to_bits());
    }

    #[test]
    fn render_is_flat_key_value() {
        let text = render(&[kv("a", "1"), kv_float("b", 0.5)]);
        assert_eq!(text, "a = 1\nb = 0.5\n");
    }
}
