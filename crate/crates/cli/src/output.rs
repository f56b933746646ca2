//! Result rows and CSV emission.

use std::cmp::Ordering;
use std::fmt::Write as _;

/// Column order of every result CSV.
pub const ROW_HEADER: &str = "n,protocol,param,node,v_hat,se,analytic,analytic_kind";

/// One estimate, usually a node or a network average.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub n: usize,
    pub protocol: String,
    /// Free-form sweep coordinate, e.g. `g=2` or `net=3`.
    pub param: String,
    /// Node index, or a label such as `avg`.
    pub node: String,
    pub v_hat: f64,
    /// `NaN` for deterministic values.
    pub se: f64,
    pub analytic: Option<f64>,
    pub analytic_kind: String,
}

impl Row {
    pub fn new(
        n: usize,
        protocol: impl Into<String>,
        param: impl Into<String>,
        node: impl Into<String>,
    ) -> Self {
        Self {
            n,
            protocol: protocol.into(),
            param: param.into(),
            node: node.into(),
            v_hat: f64::NAN,
            se: f64::NAN,
            analytic: None,
            analytic_kind: String::new(),
        }
    }

    pub fn estimate(mut self, est: gossip_age::stats::Estimate) -> Self {
        self.v_hat = est.mean;
        self.se = est.se;
        self
    }

    pub fn value(mut self, v: f64) -> Self {
        self.v_hat = v;
        self
    }

    pub fn analytic(mut self, value: f64, kind: impl Into<String>) -> Self {
        self.analytic = Some(value);
        self.analytic_kind = kind.into();
        self
    }

    fn node_key(&self) -> (u8, usize, &str) {
        match self.node.parse::<usize>() {
            Ok(i) => (0, i, ""),
            Err(_) => (1, 0, &self.node),
        }
    }

    fn cmp_key(&self, other: &Self) -> Ordering {
        (&self.protocol, &self.param, self.n, self.node_key()).cmp(&(
            &other.protocol,
            &other.param,
            other.n,
            other.node_key(),
        ))
    }
}

fn num(out: &mut String, v: f64) {
    if v.is_nan() {
        return;
    }
    let _ = write!(out, "{v}");
}

/// Rows sorted by protocol, param, n and node, with a header line.
pub fn rows_csv(rows: &[Row]) -> String {
    let mut sorted: Vec<&Row> = rows.iter().collect();
    sorted.sort_by(|a, b| a.cmp_key(b));
    let mut out = String::from(ROW_HEADER);
    out.push('\n');
    for r in sorted {
        let _ = write!(out, "{},{},{},{},", r.n, r.protocol, r.param, r.node);
        num(&mut out, r.v_hat);
        out.push(',');
        num(&mut out, r.se);
        out.push(',');
        if let Some(a) = r.analytic {
            num(&mut out, a);
        }
        let _ = writeln!(out, ",{}", r.analytic_kind);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_sort_numerically_and_leave_blanks() {
        let rows = vec![
            Row::new(8, "p", "", "10").value(1.0),
            Row::new(8, "p", "", "avg").value(2.0),
            Row::new(8, "p", "", "2").value(3.0).analytic(3.5, "exact"),
        ];
        let csv = rows_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], ROW_HEADER);
        assert_eq!(lines[1], "8,p,,2,3,,3.5,exact");
        assert_eq!(lines[2], "8,p,,10,1,,,");
        assert_eq!(lines[3], "8,p,,avg,2,,,");
    }
}
