//! Scene files: a sectioned key-value text format describing a chart
//! dimension, a connection (sparse Christoffel entries) or a metric, a
//! curve, and optionally a chart map.
//!
//! ```text
//! [manifold]
//! dim = 3
//! [connection]
//! Gamma[3,1,2] = "x1 + x2^2"
//! Gamma[3,2,1] = "x1 + x2^2"
//! [curve]
//! x1 = "-t^2"
//! x2 = "t"
//! x3 = "0"
//! domain = [-2.0, 2.0]
//! ```
//!
//! A metric scene replaces the `[connection]` section with `[metric]`
//! entries `g[i,j] = "..."` and is converted through its Levi-Civita
//! connection on load. A `[chart_map]` section lists `forward[i]` and
//! `inverse[i]` expressions. Lines starting with `#` are comments.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::curve::{CurveError, CurveSpec};
use crate::expr::{parse_expr, Expr, ParseError};
use crate::geometry::{ChartMap, ConnectionField, GeometryError, MetricField};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: expression error at column {col}: {msg}")]
    Expr { line: usize, col: usize, msg: String },
    #[error("missing [manifold] section with a dim entry")]
    MissingDim,
    #[error("scene must contain exactly one of [connection] or [metric] (found {found})")]
    ConnectionOrMetric { found: &'static str },
    #[error("missing [curve] section")]
    MissingCurve,
    #[error("line {line}: index {index} out of range 1..={dim}")]
    IndexOutOfRange { line: usize, index: usize, dim: usize },
    #[error("[curve] is missing component x{0}")]
    MissingCurveComponent(usize),
    #[error("[curve] is missing the domain entry")]
    MissingDomain,
    #[error("[chart_map] is missing {kind}[{index}]")]
    MissingChartComponent { kind: &'static str, index: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// A loaded scene: the connection (possibly derived from a metric), the
/// curve, and an optional chart map.
pub struct Scene {
    pub dim: usize,
    pub connection: ConnectionField,
    pub curve: CurveSpec,
    pub chart_map: Option<ChartMap>,
    /// Present when the scene declared a metric rather than raw symbols.
    pub metric: Option<MetricField>,
}

impl fmt::Debug for Scene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scene")
            .field("dim", &self.dim)
            .field("chart_map", &self.chart_map.is_some())
            .field("metric", &self.metric.is_some())
            .finish()
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scene_str(&text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    None,
    Manifold,
    Connection,
    Metric,
    Curve,
    ChartMap,
}

pub fn parse_scene_str(text: &str) -> Result<Scene, SceneError> {
    // first pass: the dimension, needed to parse any expression
    let mut dim: Option<usize> = None;
    {
        let mut section = Section::None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = section_header(line) {
                section = classify_section(name, lineno + 1)?;
                continue;
            }
            if section == Section::Manifold {
                let (key, value) = split_kv(line, lineno + 1)?;
                if key == "dim" {
                    let d: usize = value.trim().parse().map_err(|_| SceneError::Syntax {
                        line: lineno + 1,
                        msg: format!("dim must be a positive integer, got '{value}'"),
                    })?;
                    if d == 0 {
                        return Err(SceneError::Syntax {
                            line: lineno + 1,
                            msg: "dim must be at least 1".to_string(),
                        });
                    }
                    dim = Some(d);
                }
            }
        }
    }
    let dim = dim.ok_or(SceneError::MissingDim)?;

    let mut have_connection_section = false;
    let mut have_metric_section = false;
    let mut have_curve_section = false;
    let mut gamma_entries: Vec<(usize, usize, usize, Expr)> = Vec::new();
    let mut metric_entries: Vec<(usize, usize, Expr)> = Vec::new();
    let mut curve_components: Vec<Option<Expr>> = vec![None; dim];
    let mut domain: Option<(f64, f64)> = None;
    let mut forward: Vec<Option<Expr>> = vec![None; dim];
    let mut inverse: Vec<Option<Expr>> = vec![None; dim];
    let mut have_chart_section = false;

    let mut section = Section::None;
    for (lineno, raw) in text.lines().enumerate() {
        let line_number = lineno + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = section_header(line) {
            section = classify_section(name, line_number)?;
            match section {
                Section::Connection => have_connection_section = true,
                Section::Metric => have_metric_section = true,
                Section::Curve => have_curve_section = true,
                Section::ChartMap => have_chart_section = true,
                _ => {}
            }
            continue;
        }
        let (key, value) = split_kv(line, line_number)?;
        match section {
            Section::None => {
                return Err(SceneError::Syntax {
                    line: line_number,
                    msg: format!("entry '{key}' before any section header"),
                })
            }
            Section::Manifold => {
                if key != "dim" {
                    return Err(SceneError::Syntax {
                        line: line_number,
                        msg: format!("unknown [manifold] key '{key}'"),
                    });
                }
            }
            Section::Connection => {
                let idx = indexed_key(key, "Gamma", 3, line_number)?;
                check_index_range(&idx, dim, line_number)?;
                let e = quoted_expr(value, dim, line_number)?;
                gamma_entries.push((idx[0], idx[1], idx[2], e));
            }
            Section::Metric => {
                let idx = indexed_key(key, "g", 2, line_number)?;
                check_index_range(&idx, dim, line_number)?;
                let e = quoted_expr(value, dim, line_number)?;
                metric_entries.push((idx[0], idx[1], e));
            }
            Section::Curve => {
                if key == "domain" {
                    domain = Some(parse_domain(value, line_number)?);
                } else if let Some(k) = key.strip_prefix('x') {
                    let k: usize = k.parse().map_err(|_| SceneError::Syntax {
                        line: line_number,
                        msg: format!("unknown [curve] key '{key}'"),
                    })?;
                    if k == 0 || k > dim {
                        return Err(SceneError::IndexOutOfRange {
                            line: line_number,
                            index: k,
                            dim,
                        });
                    }
                    curve_components[k - 1] = Some(quoted_expr(value, dim, line_number)?);
                } else {
                    return Err(SceneError::Syntax {
                        line: line_number,
                        msg: format!("unknown [curve] key '{key}'"),
                    });
                }
            }
            Section::ChartMap => {
                let (kind, slot) = if key.starts_with("forward") {
                    ("forward", &mut forward)
                } else if key.starts_with("inverse") {
                    ("inverse", &mut inverse)
                } else {
                    return Err(SceneError::Syntax {
                        line: line_number,
                        msg: format!("unknown [chart_map] key '{key}'"),
                    });
                };
                let idx = indexed_key(key, kind, 1, line_number)?;
                check_index_range(&idx, dim, line_number)?;
                slot[idx[0] - 1] = Some(quoted_expr(value, dim, line_number)?);
            }
        }
    }

    match (have_connection_section, have_metric_section) {
        (true, false) | (false, true) => {}
        (true, true) => return Err(SceneError::ConnectionOrMetric { found: "both" }),
        (false, false) => return Err(SceneError::ConnectionOrMetric { found: "neither" }),
    }
    if !have_curve_section {
        return Err(SceneError::MissingCurve);
    }

    let (connection, metric) = if have_metric_section {
        let metric = MetricField::from_entries(dim, &metric_entries)?;
        (metric.levi_civita()?, Some(metric))
    } else {
        (ConnectionField::from_entries(dim, &gamma_entries)?, None)
    };

    let mut comps = Vec::with_capacity(dim);
    for (k, c) in curve_components.into_iter().enumerate() {
        comps.push(c.ok_or(SceneError::MissingCurveComponent(k + 1))?);
    }
    let domain = domain.ok_or(SceneError::MissingDomain)?;
    let curve = CurveSpec::new(comps, domain)?;

    let chart_map = if have_chart_section {
        let mut f = Vec::with_capacity(dim);
        let mut g = Vec::with_capacity(dim);
        for k in 0..dim {
            f.push(forward[k].clone().ok_or(SceneError::MissingChartComponent {
                kind: "forward",
                index: k + 1,
            })?);
            g.push(inverse[k].clone().ok_or(SceneError::MissingChartComponent {
                kind: "inverse",
                index: k + 1,
            })?);
        }
        Some(ChartMap::new(dim, f, g)?)
    } else {
        None
    };

    Ok(Scene { dim, connection, curve, chart_map, metric })
}

fn strip_comment(line: &str) -> &str {
    // '#' starts a comment unless inside a quoted expression
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn section_header(line: &str) -> Option<&str> {
    let inner = line.strip_prefix('[')?.strip_suffix(']')?;
    Some(inner.trim())
}

fn classify_section(name: &str, line: usize) -> Result<Section, SceneError> {
    Ok(match name {
        "manifold" => Section::Manifold,
        "connection" => Section::Connection,
        "metric" => Section::Metric,
        "curve" => Section::Curve,
        "chart_map" => Section::ChartMap,
        other => {
            return Err(SceneError::Syntax {
                line,
                msg: format!("unknown section [{other}]"),
            })
        }
    })
}

fn split_kv(line: &str, lineno: usize) -> Result<(&str, &str), SceneError> {
    let eq = line.find('=').ok_or_else(|| SceneError::Syntax {
        line: lineno,
        msg: format!("expected 'key = value', got '{line}'"),
    })?;
    Ok((line[..eq].trim(), line[eq + 1..].trim()))
}

/// Parse `name[i,j,...]` with the expected arity.
fn indexed_key(
    key: &str,
    name: &str,
    arity: usize,
    line: usize,
) -> Result<Vec<usize>, SceneError> {
    let err = |msg: String| SceneError::Syntax { line, msg };
    let rest = key
        .strip_prefix(name)
        .ok_or_else(|| err(format!("expected '{name}[..]', got '{key}'")))?;
    let inner = rest
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| err(format!("expected '{name}[..]', got '{key}'")))?;
    let idx: Result<Vec<usize>, _> = inner.split(',').map(|p| p.trim().parse()).collect();
    let idx = idx.map_err(|_| err(format!("bad index list in '{key}'")))?;
    if idx.len() != arity {
        return Err(err(format!(
            "'{name}[..]' takes {arity} indices, got {}",
            idx.len()
        )));
    }
    Ok(idx)
}

fn check_index_range(idx: &[usize], dim: usize, line: usize) -> Result<(), SceneError> {
    for &k in idx {
        if k == 0 || k > dim {
            return Err(SceneError::IndexOutOfRange { line, index: k, dim });
        }
    }
    Ok(())
}

fn quoted_expr(value: &str, dim: usize, line: usize) -> Result<Expr, SceneError> {
    let inner = value
        .strip_prefix('"')
        .and_then(|v| v.strip_suffix('"'))
        .ok_or_else(|| SceneError::Syntax {
            line,
            msg: format!("expression must be double-quoted, got {value}"),
        })?;
    parse_expr(inner, dim as u32).map_err(|e: ParseError| SceneError::Expr {
        line,
        col: e.offset,
        msg: e.kind.to_string(),
    })
}

fn parse_domain(value: &str, line: usize) -> Result<(f64, f64), SceneError> {
    let err = |msg: String| SceneError::Syntax { line, msg };
    let inner = value
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .ok_or_else(|| err(format!("domain must look like [a, b], got '{value}'")))?;
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(err("domain takes exactly two endpoints".to_string()));
    }
    let a: f64 = parts[0]
        .parse()
        .map_err(|_| err(format!("bad domain endpoint '{}'", parts[0])))?;
    let b: f64 = parts[1]
        .parse()
        .map_err(|_| err(format!("bad domain endpoint '{}'", parts[1])))?;
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE9: &str = r#"
[manifold]
dim = 3
[connection]
Gamma[3,1,2] = "x1 + x2^2"
Gamma[3,2,1] = "x1 + x2^2"
[curve]
x1 = "-t^2"
x2 = "t"
x3 = "0"
domain = [-2.0, 2.0]
"#;

    #[test]
    fn loads_the_reference_scene() {
        let scene = parse_scene_str(EXAMPLE9).unwrap();
        assert_eq!(scene.dim, 3);
        let g = scene.connection.christoffel_at(&[1.0, 2.0, 0.0]).unwrap();
        assert_eq!(g.get(2, 0, 1), 5.0);
        assert_eq!(scene.curve.domain(), (-2.0, 2.0));
        assert_eq!(scene.curve.point(2.0).unwrap(), vec![-4.0, 2.0, 0.0]);
        assert!(scene.chart_map.is_none());
    }

    #[test]
    fn dimension_errors_are_reported_with_lines() {
        let bad = EXAMPLE9.replace("Gamma[3,1,2]", "Gamma[4,1,1]");
        match parse_scene_str(&bad) {
            Err(SceneError::IndexOutOfRange { line, index: 4, dim: 3 }) => {
                assert_eq!(line, 5);
            }
            other => panic!("expected index error, got {other:?}"),
        }
    }

    #[test]
    fn metric_scene_produces_levi_civita() {
        let scene = parse_scene_str(
            r#"
[manifold]
dim = 2
[metric]
g[1,1] = "1/x2^2"
g[2,2] = "1/x2^2"
[curve]
x1 = "t"
x2 = "1"
domain = [-1.0, 1.0]
"#,
        )
        .unwrap();
        assert!(scene.metric.is_some());
        let g = scene.connection.christoffel_at(&[0.0, 2.0]).unwrap();
        assert_eq!(g.get(0, 0, 1), -0.5);
        assert_eq!(g.get(1, 0, 0), 0.5);
        assert_eq!(g.get(1, 1, 1), -0.5);
    }

    #[test]
    fn connection_and_metric_are_mutually_exclusive() {
        let both = EXAMPLE9.to_string() + "[metric]\ng[1,1] = \"1\"\n";
        assert!(matches!(
            parse_scene_str(&both),
            Err(SceneError::ConnectionOrMetric { found: "both" })
        ));
        let neither = r#"
[manifold]
dim = 2
[curve]
x1 = "t"
x2 = "t^2"
domain = [0.0, 1.0]
"#;
        assert!(matches!(
            parse_scene_str(neither),
            Err(SceneError::ConnectionOrMetric { found: "neither" })
        ));
    }

    #[test]
    fn chart_map_round_trips() {
        let scene = parse_scene_str(
            r#"
[manifold]
dim = 3
[connection]
[curve]
x1 = "t"
x2 = "t^2"
x3 = "t^4"
domain = [-1.0, 1.0]
[chart_map]
forward[1] = "x1"
forward[2] = "x2 + x1^2"
forward[3] = "x3"
inverse[1] = "x1"
inverse[2] = "x2 - x1^2"
inverse[3] = "x3"
"#,
        )
        .unwrap();
        let map = scene.chart_map.unwrap();
        let defect = map
            .roundtrip_defect(&[vec![0.3, -0.2, 0.9], vec![1.0, 2.0, -1.0]])
            .unwrap();
        assert!(defect < 1e-12);
    }

    #[test]
    fn expression_errors_carry_line_and_column() {
        let bad = EXAMPLE9.replace("\"-t^2\"", "\"-t^\"");
        match parse_scene_str(&bad) {
            Err(SceneError::Expr { line: 8, .. }) => {}
            other => panic!("expected expression error on line 8, got {other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored()  {
        let commented = EXAMPLE9.replace("dim = 3", "dim = 3  # three coordinates\n\n# curve next");
        assert!(parse_scene_str(&commented).is_ok());
    }
}
