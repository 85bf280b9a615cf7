//! Problem-spec files.
//!
//! ```json
//! {
//!   "kind": "channel",
//!   "name": "bsc-0.1",
//!   "alphabets": { "x": 2, "y": 2, "s1": 1, "s2": 1 },
//!   "state_joint": { "axes": ["s1", "s2"], "values": [[1.0]] },
//!   "channel": { "axes": ["x", "s1", "s2", "y"], "values": [[[[0.9, 0.1]]], [[[0.1, 0.9]]]] },
//!   "defaults": { "u_size": 2, "epsilon": 0.1, "seed": 7 }
//! }
//! ```
//!
//! Every tensor names its axes; values are nested arrays, outermost axis
//! first. A source file carries `source_joint` over `x, s1, s2` and
//! `distortion` over `x, xhat`. Omitted state alphabets have one symbol, and
//! `state_joint` may then be left out.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use twosided::special::ProblemKind;
use twosided::{ChannelProblem, SourceProblem};

use crate::error::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    kind: String,
    #[serde(default)]
    name: Option<String>,
    alphabets: BTreeMap<String, usize>,
    #[serde(default)]
    state_joint: Option<RawTensor>,
    #[serde(default)]
    channel: Option<RawTensor>,
    #[serde(default)]
    source_joint: Option<RawTensor>,
    #[serde(default)]
    distortion: Option<RawTensor>,
    #[serde(default)]
    defaults: Defaults,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTensor {
    axes: Vec<String>,
    values: Value,
}

/// Optional per-file defaults; command-line flags override them.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    pub u_size: Option<usize>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub enum Problem {
    Channel(ChannelProblem),
    Source(SourceProblem),
}

impl Problem {
    pub fn kind(&self) -> ProblemKind {
        match self {
            Problem::Channel(_) => ProblemKind::Channel,
            Problem::Source(_) => ProblemKind::Source,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpecFile {
    /// `name` from the file, else the file stem.
    pub name: String,
    pub problem: Problem,
    pub defaults: Defaults,
}

impl SpecFile {
    pub fn channel(&self) -> Result<&ChannelProblem, CliError> {
        match &self.problem {
            Problem::Channel(p) => Ok(p),
            Problem::Source(_) => Err(CliError::WrongKind {
                expected: "channel",
                found: "source",
            }),
        }
    }

    pub fn source(&self) -> Result<&SourceProblem, CliError> {
        match &self.problem {
            Problem::Source(p) => Ok(p),
            Problem::Channel(_) => Err(CliError::WrongKind {
                expected: "source",
                found: "channel",
            }),
        }
    }
}

pub fn load(path: &Path) -> Result<SpecFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse(&text, &stem)
}

pub fn parse(text: &str, fallback_name: &str) -> Result<SpecFile, CliError> {
    let raw: RawSpec = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let kind: ProblemKind = raw
        .kind
        .parse()
        .map_err(|e: twosided::Error| CliError::invalid("kind", e.to_string()))?;
    let sizes = Sizes::new(&raw.alphabets, kind)?;
    let problem = match kind {
        ProblemKind::Channel => Problem::Channel(build_channel(&raw, &sizes)?),
        ProblemKind::Source => Problem::Source(build_source(&raw, &sizes)?),
    };
    if let Some(u) = raw.defaults.u_size {
        if u == 0 {
            return Err(CliError::invalid("defaults.u_size", "must be at least 1"));
        }
    }
    if let Some(e) = raw.defaults.epsilon {
        if !(e > 0.0 && e.is_finite()) {
            return Err(CliError::invalid("defaults.epsilon", "must be positive"));
        }
    }
    Ok(SpecFile {
        name: raw.name.unwrap_or_else(|| fallback_name.to_string()),
        problem,
        defaults: raw.defaults,
    })
}

struct Sizes(BTreeMap<String, usize>);

impl Sizes {
    fn new(declared: &BTreeMap<String, usize>, kind: ProblemKind) -> Result<Self, CliError> {
        let (required, optional): (&[&str], &[&str]) = match kind {
            ProblemKind::Channel => (&["x", "y"], &["s1", "s2"]),
            ProblemKind::Source => (&["x", "xhat"], &["s1", "s2"]),
        };
        let mut out = BTreeMap::new();
        for name in declared.keys() {
            if !required.contains(&name.as_str()) && !optional.contains(&name.as_str()) {
                return Err(CliError::invalid(
                    format!("alphabets.{name}"),
                    format!("unknown alphabet for a {} problem", kind.name()),
                ));
            }
        }
        for &name in required.iter().chain(optional) {
            let size = match declared.get(name) {
                Some(&s) => s,
                None if optional.contains(&name) => 1,
                None => {
                    return Err(CliError::invalid(
                        "alphabets",
                        format!("missing alphabet `{name}`"),
                    ))
                }
            };
            if size == 0 {
                return Err(CliError::invalid(
                    format!("alphabets.{name}"),
                    "size must be at least 1",
                ));
            }
            out.insert(name.to_string(), size);
        }
        Ok(Sizes(out))
    }

    fn get(&self, name: &str) -> usize {
        self.0[name]
    }
}

/// Reads `tensor` and returns its entries row-major over `canonical`.
fn read_tensor(
    field: &str,
    tensor: &RawTensor,
    sizes: &Sizes,
    canonical: &[&str],
) -> Result<Vec<f64>, CliError> {
    let axes_path = format!("{field}.axes");
    let mut sorted: Vec<&str> = tensor.axes.iter().map(String::as_str).collect();
    sorted.sort_unstable();
    let mut want = canonical.to_vec();
    want.sort_unstable();
    if sorted != want {
        return Err(CliError::invalid(
            axes_path,
            format!(
                "expected the axes {canonical:?} in any order, got {:?}",
                tensor.axes
            ),
        ));
    }
    let shape: Vec<usize> = tensor.axes.iter().map(|a| sizes.get(a)).collect();
    let mut flat = Vec::with_capacity(shape.iter().product());
    flatten(
        &tensor.values,
        &shape,
        &format!("{field}.values"),
        &mut flat,
    )?;

    // Strides of the declared layout, looked up in canonical order.
    let mut strides = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    let pos: Vec<usize> = canonical
        .iter()
        .map(|c| tensor.axes.iter().position(|a| a == c).unwrap())
        .collect();
    let cshape: Vec<usize> = canonical.iter().map(|c| sizes.get(c)).collect();
    let mut out = Vec::with_capacity(flat.len());
    let mut idx = vec![0; canonical.len()];
    for _ in 0..flat.len() {
        let src: usize = idx.iter().zip(&pos).map(|(&i, &p)| i * strides[p]).sum();
        out.push(flat[src]);
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            if idx[k] < cshape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(out)
}

fn flatten(v: &Value, shape: &[usize], path: &str, out: &mut Vec<f64>) -> Result<(), CliError> {
    match shape.split_first() {
        None => {
            let x = v
                .as_f64()
                .ok_or_else(|| CliError::invalid(path, format!("expected a number, found {v}")))?;
            if !(x.is_finite() && x >= 0.0) {
                return Err(CliError::invalid(
                    path,
                    format!("entry {x} must be finite and nonnegative"),
                ));
            }
            out.push(x);
            Ok(())
        }
        Some((&n, rest)) => {
            let items = v.as_array().ok_or_else(|| {
                CliError::invalid(path, format!("expected an array of {n} entries"))
            })?;
            if items.len() != n {
                return Err(CliError::invalid(
                    path,
                    format!("expected {n} entries, found {}", items.len()),
                ));
            }
            for (i, item) in items.iter().enumerate() {
                flatten(item, rest, &format!("{path}[{i}]"), out)?;
            }
            Ok(())
        }
    }
}

fn require<'a>(t: &'a Option<RawTensor>, field: &str) -> Result<&'a RawTensor, CliError> {
    t.as_ref()
        .ok_or_else(|| CliError::invalid(field, "missing"))
}

fn forbid(t: &Option<RawTensor>, field: &str, kind: &str) -> Result<(), CliError> {
    match t {
        Some(_) => Err(CliError::invalid(
            field,
            format!("not allowed in a {kind} spec"),
        )),
        None => Ok(()),
    }
}

fn build_channel(raw: &RawSpec, sizes: &Sizes) -> Result<ChannelProblem, CliError> {
    forbid(&raw.source_joint, "source_joint", "channel")?;
    forbid(&raw.distortion, "distortion", "channel")?;
    let (nx, ny, ns1, ns2) = (
        sizes.get("x"),
        sizes.get("y"),
        sizes.get("s1"),
        sizes.get("s2"),
    );
    let state = match &raw.state_joint {
        Some(t) => read_tensor("state_joint", t, sizes, &["s1", "s2"])?,
        None if ns1 * ns2 == 1 => vec![1.0],
        None => return Err(CliError::invalid("state_joint", "missing")),
    };
    let channel = read_tensor(
        "channel",
        require(&raw.channel, "channel")?,
        sizes,
        &["x", "s1", "s2", "y"],
    )?;
    // Validate each part on its own so the error names the field.
    twosided::prob::JointDist::new(
        vec![
            twosided::prob::Alphabet::new("s1", ns1)
                .map_err(|e| CliError::core("alphabets.s1", e))?,
            twosided::prob::Alphabet::new("s2", ns2)
                .map_err(|e| CliError::core("alphabets.s2", e))?,
        ],
        state.clone(),
    )
    .map_err(|e| CliError::core("state_joint", e))?;
    ChannelProblem::from_arrays(nx, ny, ns1, ns2, state, channel)
        .map_err(|e| CliError::core("channel", e))
}

fn build_source(raw: &RawSpec, sizes: &Sizes) -> Result<SourceProblem, CliError> {
    forbid(&raw.state_joint, "state_joint", "source")?;
    forbid(&raw.channel, "channel", "source")?;
    let (nx, nh, ns1, ns2) = (
        sizes.get("x"),
        sizes.get("xhat"),
        sizes.get("s1"),
        sizes.get("s2"),
    );
    let joint = read_tensor(
        "source_joint",
        require(&raw.source_joint, "source_joint")?,
        sizes,
        &["x", "s1", "s2"],
    )?;
    let d = read_tensor(
        "distortion",
        require(&raw.distortion, "distortion")?,
        sizes,
        &["x", "xhat"],
    )?;
    SourceProblem::from_arrays(nx, nh, ns1, ns2, joint, d)
        .map_err(|e| CliError::core("source_joint", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BSC: &str = r#"{
        "kind": "channel",
        "alphabets": {"x": 2, "y": 2},
        "channel": {"axes": ["x", "s1", "s2", "y"], "values": [[[[0.9, 0.1]]], [[[0.1, 0.9]]]]}
    }"#;

    #[test]
    fn trivial_states_may_be_omitted() {
        let s = parse(BSC, "bsc").unwrap();
        assert_eq!(s.name, "bsc");
        let p = s.channel().unwrap();
        assert_eq!(p.s1_alpha().size(), 1);
        assert_eq!(p.p_y(0, 0, 0, 1), 0.1);
    }

    #[test]
    fn declared_axis_order_is_honoured() {
        // Distortion given as [xhat][x] with an asymmetric table.
        let text = r#"{
            "kind": "source",
            "alphabets": {"x": 2, "xhat": 3},
            "source_joint": {"axes": ["s2", "x", "s1"], "values": [[[0.5], [0.5]]]},
            "distortion": {"axes": ["xhat", "x"], "values": [[0, 1], [2, 3], [4, 5]]}
        }"#;
        let s = parse(text, "t").unwrap();
        let p = s.source().unwrap();
        assert_eq!(p.distortion(), &[0.0, 2.0, 4.0, 1.0, 3.0, 5.0]);
    }

    #[test]
    fn errors_name_the_offending_path() {
        let bad = BSC.replace("[[[0.1, 0.9]]]", "[[[0.1, 0.9, 0.0]]]");
        let e = parse(&bad, "b").unwrap_err();
        assert!(e.to_string().contains("channel.values[1][0][0]"), "{e}");
        assert_eq!(e.exit_code(), 3);

        let neg = BSC.replace("0.9, 0.1", "1.1, -0.1");
        let e = parse(&neg, "b").unwrap_err();
        assert!(e.to_string().contains("channel.values[0][0][0][1]"), "{e}");

        let rows = BSC.replace("0.9, 0.1", "0.5, 0.1");
        assert_eq!(parse(&rows, "b").unwrap_err().exit_code(), 3);

        assert_eq!(parse("{\"kind\": ", "b").unwrap_err().exit_code(), 2);
        let unknown = BSC.replace("\"alphabets\"", "\"alphabet\"");
        assert_eq!(parse(&unknown, "b").unwrap_err().exit_code(), 2);
        let kind = BSC.replace("\"channel\",", "\"pipe\",");
        assert_eq!(parse(&kind, "b").unwrap_err().exit_code(), 3);
    }
}
