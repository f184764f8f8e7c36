use std::fmt::Write as _;

pub const CSV_HEADER: &str = "protocol,engine,p,p1,p2,p3,aoi,ci_half,seed,slots,zscore";

/// Rounds to 12 significant digits and prints the shortest form.
pub fn fmt_float(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    format!("{rounded}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub protocol: String,
    pub engine: &'static str,
    pub p: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub aoi: f64,
    pub ci_half: Option<f64>,
    pub std_error: Option<f64>,
    pub seed: Option<u64>,
    pub slots: Option<u64>,
    pub zscore: Option<f64>,
}

impl Row {
    pub fn to_csv(&self) -> String {
        let opt_f = |x: Option<f64>| x.map(fmt_float).unwrap_or_default();
        let opt_u = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
        [
            self.protocol.clone(),
            self.engine.to_string(),
            fmt_float(self.p),
            fmt_float(self.p1),
            fmt_float(self.p2),
            fmt_float(self.p3),
            fmt_float(self.aoi),
            opt_f(self.ci_half),
            opt_u(self.seed),
            opt_u(self.slots),
            opt_f(self.zscore),
        ]
        .join(",")
    }
}

/// Config echo, header, rows, then trailing `#` notes.
pub fn render_csv(echo: &str, rows: &[Row], notes: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{echo}");
    let _ = writeln!(out, "{CSV_HEADER}");
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv());
    }
    for n in notes {
        let _ = writeln!(out, "# {n}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_float(0.1 + 0.2), "0.3");
        assert_eq!(fmt_float(1.0), "1");
        assert_eq!(fmt_float(2.0 / 3.0), "0.666666666667");
        assert_eq!(fmt_float(12345.678901234567), "12345.6789012");
    }

    #[test]
    fn empty_optional_cells() {
        let r = Row {
            protocol: "SP".into(),
            engine: "analytic",
            p: 0.8,
            p1: 0.2,
            p2: 0.8,
            p3: 0.8,
            aoi: 4.5,
            ci_half: None,
            std_error: None,
            seed: None,
            slots: None,
            zscore: None,
        };
        assert_eq!(r.to_csv(), "SP,analytic,0.8,0.2,0.8,0.8,4.5,,,,");
    }
}
