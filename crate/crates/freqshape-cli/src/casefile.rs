//! The JSON case format.
//!
//! ```json
//! {
//!   "base_mva": 100.0,
//!   "nominal_hz": 50.0,
//!   "buses": [
//!     {"id": 0, "kind": "generator", "v": 1.0, "theta0": 0.0,
//!      "params": {"m": 3.0, "d": 1.0, "tau": 4.0, "rt": 0.05}},
//!     {"id": 1, "kind": "inverter", "v": 1.0, "theta0": 0.0, "params": {}},
//!     {"id": 2, "kind": "load", "v": 1.0, "theta0": 0.0,
//!      "params": {"d": 0.05}}
//!   ],
//!   "lines": [{"from": 0, "to": 1, "b": 8.0}, {"from": 1, "to": 2, "b": 8.0}]
//! }
//! ```
//!
//! An inverter's `params` may instead carry a pre-assigned controller:
//! `{"controller": {"type": "gfvi", "m": 3.0, "d": 1.0}}` or
//! `{"controller": {"type": "gffs", "m": 3.0, "d": 21.0,
//!   "g": {"rho": 20.0, "sigma": 4.0}}}` (`"g": null` for the zero option).

use serde::{Deserialize, Serialize};

use freqshape::bus::{GOption, GeneratorParams, GffsParams, GfviParams, LoadParams, ParamError};
use freqshape::net::{Bus, BusParams, Case, InverterControl, Line, ValidationError};

#[derive(Debug, thiserror::Error)]
pub enum CaseFileError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("bus {id}: {source}")]
    BusParams {
        id: u32,
        #[source]
        source: ParamError,
    },
    #[error("bus {id}: {message}")]
    BusShape { id: u32, message: String },
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Serialize, Deserialize)]
struct CaseDoc {
    base_mva: f64,
    nominal_hz: f64,
    buses: Vec<BusDoc>,
    lines: Vec<LineDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BusDoc {
    id: u32,
    kind: KindDoc,
    v: f64,
    theta0: f64,
    params: serde_json::Value,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindDoc {
    Generator,
    Inverter,
    Load,
}

#[derive(Debug, Serialize, Deserialize)]
struct LineDoc {
    from: u32,
    to: u32,
    b: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct GeneratorDoc {
    m: f64,
    d: f64,
    tau: f64,
    rt: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LoadDoc {
    d: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct InverterDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    controller: Option<ControllerDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ControllerDoc {
    Gfvi {
        m: f64,
        d: f64,
    },
    Gffs {
        m: f64,
        d: f64,
        g: Option<GDoc>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct GDoc {
    rho: f64,
    sigma: f64,
}

fn bus_params(id: u32, kind: KindDoc, raw: serde_json::Value) -> Result<BusParams, CaseFileError> {
    let shape_err = |e: serde_json::Error| CaseFileError::BusShape {
        id,
        message: e.to_string(),
    };
    let param_err = |source: ParamError| CaseFileError::BusParams { id, source };
    match kind {
        KindDoc::Generator => {
            let g: GeneratorDoc = serde_json::from_value(raw).map_err(shape_err)?;
            Ok(BusParams::Generator(
                GeneratorParams::new(g.m, g.d, g.tau, g.rt).map_err(param_err)?,
            ))
        }
        KindDoc::Load => {
            let l: LoadDoc = serde_json::from_value(raw).map_err(shape_err)?;
            Ok(BusParams::Load(LoadParams::new(l.d).map_err(param_err)?))
        }
        KindDoc::Inverter => {
            let inv: InverterDoc = serde_json::from_value(raw).map_err(shape_err)?;
            let control = match inv.controller {
                None => None,
                Some(ControllerDoc::Gfvi { m, d }) => Some(InverterControl::Gfvi(
                    GfviParams::new(m, d).map_err(param_err)?,
                )),
                Some(ControllerDoc::Gffs { m, d, g }) => {
                    let g = match g {
                        None => GOption::Zero,
                        Some(GDoc { rho, sigma }) => {
                            GOption::first_order(rho, sigma).map_err(param_err)?
                        }
                    };
                    Some(InverterControl::Gffs(
                        GffsParams::new(m, d, g).map_err(param_err)?,
                    ))
                }
            };
            Ok(BusParams::Inverter(control))
        }
    }
}

/// Parses and validates a case document.
pub fn parse_case(text: &str) -> Result<Case, CaseFileError> {
    let doc: CaseDoc = serde_json::from_str(text).map_err(|e| CaseFileError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut buses = Vec::with_capacity(doc.buses.len());
    for b in doc.buses {
        buses.push(Bus {
            id: b.id,
            voltage_mag: b.v,
            angle0: b.theta0,
            params: bus_params(b.id, b.kind, b.params)?,
        });
    }
    let lines = doc
        .lines
        .into_iter()
        .map(|l| Line {
            from: l.from,
            to: l.to,
            b: l.b,
        })
        .collect();
    Ok(Case::new(buses, lines, doc.base_mva, doc.nominal_hz)?)
}

/// Serializes a case back to the document format. `parse_case` of the
/// output reproduces the case exactly (float values round-trip through
/// their shortest decimal form).
pub fn serialize_case(case: &Case) -> String {
    let buses = case
        .buses()
        .iter()
        .map(|bus| {
            let (kind, params) = match &bus.params {
                BusParams::Generator(p) => (
                    KindDoc::Generator,
                    serde_json::to_value(GeneratorDoc {
                        m: p.m,
                        d: p.d,
                        tau: p.tau,
                        rt: p.rt,
                    })
                    .expect("serializable"),
                ),
                BusParams::Load(p) => (
                    KindDoc::Load,
                    serde_json::to_value(LoadDoc { d: p.d }).expect("serializable"),
                ),
                BusParams::Inverter(ctl) => {
                    let controller = ctl.as_ref().map(|c| match c {
                        InverterControl::Gfvi(p) => ControllerDoc::Gfvi { m: p.m, d: p.d },
                        InverterControl::Gffs(p) => ControllerDoc::Gffs {
                            m: p.m,
                            d: p.d,
                            g: match p.g {
                                GOption::Zero => None,
                                GOption::FirstOrder { rho, sigma } => Some(GDoc { rho, sigma }),
                            },
                        },
                    });
                    (
                        KindDoc::Inverter,
                        serde_json::to_value(InverterDoc { controller }).expect("serializable"),
                    )
                }
            };
            BusDoc {
                id: bus.id,
                kind,
                v: bus.voltage_mag,
                theta0: bus.angle0,
                params,
            }
        })
        .collect();
    let lines = case
        .lines()
        .iter()
        .map(|l| LineDoc {
            from: l.from,
            to: l.to,
            b: l.b,
        })
        .collect();
    let doc = CaseDoc {
        base_mva: case.base_mva,
        nominal_hz: case.nominal_hz,
        buses,
        lines,
    };
    serde_json::to_string_pretty(&doc).expect("case documents are serializable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use freqshape::net::BusKind;

    const MINIMAL: &str = r#"{
        "base_mva": 100.0,
        "nominal_hz": 50.0,
        "buses": [
            {"id": 0, "kind": "generator", "v": 1.0, "theta0": 0.0,
             "params": {"m": 1.0, "d": 1.0, "tau": 1.0, "rt": 1.0}},
            {"id": 1, "kind": "load", "v": 1.0, "theta0": 0.0, "params": {"d": 0.05}}
        ],
        "lines": [{"from": 0, "to": 1, "b": 10.0}]
    }"#;

    #[test]
    fn parses_minimal_case() {
        let case = parse_case(MINIMAL).unwrap();
        assert_eq!(case.n(), 2);
        assert_eq!(case.indices_of_kind(BusKind::Generator).len(), 1);
    }

    #[test]
    fn reports_parse_location() {
        let err = parse_case("{\n  \"base_mva\": oops").unwrap_err();
        match err {
            CaseFileError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_dangling_line() {
        let text = MINIMAL.replace("\"to\": 1", "\"to\": 99");
        match parse_case(&text).unwrap_err() {
            CaseFileError::Validation(ValidationError::UnknownBusId(99)) => {}
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        let text = MINIMAL.replace("\"m\": 1.0", "\"m\": 0.0");
        assert!(matches!(
            parse_case(&text).unwrap_err(),
            CaseFileError::BusParams { id: 0, .. }
        ));
    }

    #[test]
    fn parses_assigned_controllers() {
        let text = r#"{
            "base_mva": 100.0,
            "nominal_hz": 50.0,
            "buses": [
                {"id": 0, "kind": "inverter", "v": 1.0, "theta0": 0.0,
                 "params": {"controller": {"type": "gfvi", "m": 2.0, "d": 0.5}}},
                {"id": 1, "kind": "inverter", "v": 1.0, "theta0": 0.0,
                 "params": {"controller": {"type": "gffs", "m": 2.0, "d": 21.0,
                                            "g": {"rho": 20.0, "sigma": 4.0}}}}
            ],
            "lines": [{"from": 0, "to": 1, "b": 5.0}]
        }"#;
        let case = parse_case(text).unwrap();
        assert!(case.buses().iter().all(|b| b.tf().is_some()));
    }

    #[test]
    fn roundtrip_preserves_case() {
        let case = parse_case(MINIMAL).unwrap();
        let text = serialize_case(&case);
        let back = parse_case(&text).unwrap();
        assert_eq!(case, back);
    }
}
