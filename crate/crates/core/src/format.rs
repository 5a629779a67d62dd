// SPDX-License-Identifier: Apache-2.0

//! Text formats: `%g`-style numbers and the theory and stats TSV files.

use std::io::{BufRead, Write};

use crate::data::Database;
use crate::error::PatternError;
use crate::learner::Theory;
use crate::rule::{parse_rule, Rule};
use crate::utility::ratio_f64;

/// Formats like C's `%g`: six significant digits, trailing zeros removed,
/// scientific notation below 1e-4 or from 1e6 upward.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let fixed = format!("{:.*}", (5 - exp) as usize, x);
        trim_zeros(&fixed).to_owned()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const THEORY_HEADER: &str = "#rank\trule\tweight\tP\tS\tB\trecall\tC\tU\tcumulative_U";
pub const STATS_HEADER: &str = "#rule\tbody_count\trule_count\tP\tS\tB\trecall\tC\tU";

pub fn write_theory_tsv<W: Write>(theory: &Theory, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{THEORY_HEADER}")?;
    for (i, e) in theory.entries.iter().enumerate() {
        let s = &e.stats;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            i + 1,
            e.text,
            sig6(e.weight),
            sig6(ratio_f64(&s.precision)),
            s.symmetry,
            sig6(ratio_f64(&s.prior)),
            sig6(s.recall),
            sig6(s.complexity),
            sig6(s.utility),
            sig6(e.cumulative_utility)
        )?;
    }
    Ok(())
}

pub fn write_stats_tsv<'a, W: Write>(
    rows: impl IntoIterator<Item = (&'a str, &'a crate::utility::RuleStats)>,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{STATS_HEADER}")?;
    for (text, s) in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            text,
            s.body_count,
            s.rule_count,
            sig6(ratio_f64(&s.precision)),
            s.symmetry,
            sig6(ratio_f64(&s.prior)),
            sig6(s.recall),
            sig6(s.complexity),
            sig6(s.utility)
        )?;
    }
    Ok(())
}

/// A rule read back from a theory file.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedRule {
    pub rule: Rule,
    pub text: String,
    pub weight: f64,
}

/// Reads `rank TAB rule TAB weight ...` lines; `#` lines are skipped.
pub fn read_theory_tsv<R: BufRead>(reader: R, db: &Database) -> Result<Vec<WeightedRule>, PatternError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| PatternError::Invalid(e.to_string()))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(PatternError::Invalid(format!("theory line {}: expected at least 3 fields", idx + 1)));
        }
        let weight: f64 = fields[2]
            .parse()
            .map_err(|_| PatternError::Invalid(format!("theory line {}: bad weight `{}`", idx + 1, fields[2])))?;
        out.push(WeightedRule { rule: parse_rule(fields[1], db)?, text: fields[1].to_owned(), weight });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (1.0, "1"),
            (0.5, "0.5"),
            (1.0 / 3.0, "0.333333"),
            (0.37962, "0.37962"),
            (123456.0, "123456"),
            (1234567.0, "1.23457e+06"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-2.5, "-2.5"),
            (999999.5, "1e+06"),
            (0.049787068367863944, "0.0497871"),
            (100.0, "100"),
        ];
        for (x, want) in cases {
            assert_eq!(sig6(x), want, "{x}");
        }
    }
}
