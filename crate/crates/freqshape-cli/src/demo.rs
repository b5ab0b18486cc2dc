//! The bundled desk-scale demonstration network: six turbine-equipped
//! generators with spread time constants, six bare inverter buses, and two
//! damping loads on a ring with cross-ties.

use freqshape::net::Case;

use crate::casefile::parse_case;

pub const DEMO_CASE_JSON: &str = include_str!("../cases/demo.json");

/// Parses the bundled demo case.
pub fn demo_case() -> Case {
    parse_case(DEMO_CASE_JSON).expect("bundled case is valid")
}
