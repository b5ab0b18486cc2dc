//! Certification-focused integration tests: the witness search over
//! shaped-fleet tunings and the eigenvalue cross-check of a certified case.

use freqshape::bus::{GOption, GeneratorParams, GffsParams, LoadParams};
use freqshape::net::{Bus, BusParams, Case, InverterControl, Line};
use freqshape::sim::{assemble_linear_with, Grounding};
use freqshape::stability::{certify_bus, certify_system, BusVerdict, SearchGrid};

/// A witness with τ_α ∈ {0.1, 1, 10} and ε = 1e-6 exists across a sweep of
/// practically tuned shaping inverters, where the damping carries the
/// droop share on top of a base term (d = d_base + ρ). For extreme
/// coupling-to-damping ratios outside this tuning pattern the small
/// witness range genuinely fails the positive-realness condition and a
/// larger τ_α is required, so the sweep pins the region the shipped grid
/// covers.
#[test]
fn shaped_fleet_tunings_certify_within_small_witness_range() {
    let taus = [0.1, 1.0, 10.0];
    let eps = 1e-6;
    for &m in &[0.5, 2.0, 8.0] {
        for &sigma in &[1.0, 5.0] {
            for &rho in &[5.0, 20.0] {
                for &d_base in &[0.5, 2.0] {
                    for &gamma in &[1.0, 10.0, 80.0] {
                        let p = GffsParams::new(
                            m,
                            d_base + rho,
                            GOption::first_order(rho, sigma).unwrap(),
                        )
                        .unwrap();
                        let h = p.tf();
                        let certified = taus
                            .iter()
                            .any(|&t| certify_bus(&h, gamma, t, eps).unwrap() == BusVerdict::Certified);
                        assert!(
                            certified,
                            "no witness for m={m} σ={sigma} ρ={rho} d_base={d_base} γ={gamma}"
                        );
                    }
                }
            }
        }
    }
}

fn shaped_case() -> Case {
    // Three generators, three shaping inverters, one load on a ring.
    let gens = [
        GeneratorParams::new(2.5, 1.0, 3.0, 0.05).unwrap(),
        GeneratorParams::new(3.0, 1.0, 4.0, 0.05).unwrap(),
        GeneratorParams::new(3.5, 1.0, 5.0, 0.04).unwrap(),
    ];
    let r_inv_total: f64 = gens.iter().map(|g| g.rt_inv()).sum();
    let rho = r_inv_total / 3.0;
    let tau_red: f64 =
        gens.iter().map(|g| g.rt_inv() * g.tau).sum::<f64>() / r_inv_total;
    let inv = GffsParams::new(3.0, 1.0 + rho, GOption::first_order(rho, tau_red).unwrap()).unwrap();
    let mut buses: Vec<Bus> = gens
        .iter()
        .enumerate()
        .map(|(i, g)| Bus {
            id: i as u32,
            voltage_mag: 1.0,
            angle0: 0.0,
            params: BusParams::Generator(*g),
        })
        .collect();
    for id in 3..6 {
        buses.push(Bus {
            id,
            voltage_mag: 1.0,
            angle0: 0.0,
            params: BusParams::Inverter(Some(InverterControl::Gffs(inv))),
        });
    }
    buses.push(Bus {
        id: 6,
        voltage_mag: 1.0,
        angle0: 0.0,
        params: BusParams::Load(LoadParams::new(0.05).unwrap()),
    });
    let n = buses.len() as u32;
    let mut lines: Vec<Line> = (0..n)
        .map(|i| Line {
            from: i,
            to: (i + 1) % n,
            b: 8.0,
        })
        .collect();
    lines.push(Line {
        from: 0,
        to: 3,
        b: 5.0,
    });
    Case::new(buses, lines, 100.0, 50.0).unwrap()
}

#[test]
fn certified_case_has_stable_closed_loop_eigenvalues() {
    let case = shaped_case();
    let cert = certify_system(&case, &SearchGrid::default(), 1.1).unwrap();
    assert!(cert.overall, "{cert:?}");

    // Ungrounded assembly keeps the uniform-angle zero mode; everything
    // else must sit strictly in the left half plane.
    let model = assemble_linear_with(&case, Grounding::None).unwrap();
    let nx = model.ss.n_states();
    let a = nalgebra::DMatrix::from_row_slice(nx, nx, model.ss.a.data());
    let mut eigs: Vec<_> = a.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
    assert!(eigs[0].norm() < 1e-9, "zero mode missing: {:?}", eigs[0]);
    for e in &eigs[1..] {
        assert!(e.re < 1e-8, "unstable eigenvalue {e}");
    }

    // The grounded realization drops exactly the zero mode.
    let grounded = assemble_linear_with(&case, Grounding::Reference).unwrap();
    assert_eq!(grounded.ss.n_states(), nx - 1);
    let ag = nalgebra::DMatrix::from_row_slice(nx - 1, nx - 1, grounded.ss.a.data());
    for e in ag.complex_eigenvalues().iter() {
        assert!(e.re < 1e-8, "unstable eigenvalue {e} in grounded model");
    }
}
