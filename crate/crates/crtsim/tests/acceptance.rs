//! Full-pipeline acceptance checks: one check per documented guarantee of
//! the simulator, each printing a PASS/FAIL line with the measured numbers.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture` to see
//! the lines on success; on failure the harness prints them regardless.

use std::time::Instant;

use crtsim::cli::{effective_config, run_interference, run_lz, run_rabi, CommandKind};
use crtsim::dynamics::{lz_probability, schrodinger_evolve};
use crtsim::model::{
    build_first_order, build_static, derived, polaron_transform, ModelParams,
};
use crtsim::qops::{basis_state, eigh, qubit_op, Level, Operator, Qubit, QubitOp};
use crtsim::spectra::{min_gap_variant, scan_delta1, AblationVariant, LOWER_BRANCH, UPPER_BRANCH};

struct Outcome {
    label: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(label: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { label, pass, detail }
}

fn reference() -> ModelParams {
    ModelParams::default()
}

/// Minimum E₄−E₃ gap of the full Hamiltonian on a 201-point Δ₁ scan:
/// located at 4.00 ± 0.01 GHz with size 0.020 GHz ± 10%, in under 10 s.
fn anticrossing_location_and_size() -> Outcome {
    let t0 = Instant::now();
    let grid = crtsim::cli::inclusive_grid(3.8, 4.2, 0.002).unwrap();
    let points = scan_delta1(&reference(), &grid, AblationVariant::Full, 6).unwrap();
    let best = points.iter().min_by(|a, b| a.gap.total_cmp(&b.gap)).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = (best.delta1 - 4.0).abs() <= 0.01
        && (best.gap - 0.020).abs() <= 0.002
        && elapsed < 10.0;
    outcome(
        "anticrossing location and size",
        pass,
        format!(
            "min gap {:.6} GHz at delta1 = {:.4} GHz (want 0.020±0.002 at 4.00±0.01), {} points in {:.2} s (< 10 s)",
            best.gap,
            best.delta1,
            points.len(),
            elapsed
        ),
    )
}

/// Removing the pair-creation dipole terms closes the gap (≤ 0.002 GHz);
/// removing the excitation-swapping terms changes it by < 5% on [3.9, 4.1].
fn counter_rotating_ablation() -> Outcome {
    let p = reference();
    let (_, gap_nocr) =
        min_gap_variant(&p, AblationVariant::DropCounterRotating, (3.9, 4.1)).unwrap();
    let grid = crtsim::cli::inclusive_grid(3.9, 4.1, 0.01).unwrap();
    let full = scan_delta1(&p, &grid, AblationVariant::Full, 6).unwrap();
    let no_r = scan_delta1(&p, &grid, AblationVariant::DropRotating, 6).unwrap();
    let max_rel = full
        .iter()
        .zip(&no_r)
        .map(|(f, n)| (f.gap - n.gap).abs() / f.gap)
        .fold(0.0_f64, f64::max);
    let pass = gap_nocr <= 0.002 && max_rel < 0.05;
    outcome(
        "counter-rotating ablation",
        pass,
        format!(
            "gap without pair terms {:.2e} GHz (≤ 2e-3); gap without swap terms deviates ≤ {:.2}% (< 5%)",
            gap_nocr,
            100.0 * max_rel
        ),
    )
}

/// Branch characters: ψ₃ is |0,e,e⟩-like left of the crossing (the primed
/// overlap |⟨0,e,e|ψ₃⟩|² ≥ 0.9 at 3.9 GHz), ψ₄ is |0,e,e⟩-like right of it
/// (P₁ ≥ 0.9 at 4.1 GHz), and both branches are the symmetric/antisymmetric
/// mixtures at resonance (Ps± ≥ 0.9 at 4.0 GHz).
fn branch_character() -> Outcome {
    let p = reference();
    let pts = scan_delta1(&p, &[3.9, 4.0, 4.1], AblationVariant::Full, 6).unwrap();
    let (left, mid, right) = (&pts[0], &pts[1], &pts[2]);
    let pass = left.p2_prime >= 0.9
        && right.p1 >= 0.9
        && mid.ps_plus >= 0.9
        && mid.ps_minus >= 0.9;
    outcome(
        "branch character",
        pass,
        format!(
            "|⟨0,e,e|ψ₃⟩|²(3.9) = {:.3}, P1(4.1) = {:.3}, Ps+(4.0) = {:.3}, Ps-(4.0) = {:.3} (all ≥ 0.9)",
            left.p2_prime, right.p1, mid.ps_plus, mid.ps_minus
        ),
    )
}

/// Closed-system conversion |1,g,g⟩ → |0,e,e⟩ at resonance: the first pair
/// population maximum reaches ≥ 0.9 at the two-level prediction
/// t = π/(2G_s) = 157 ns ± 15%.
fn pair_rabi_timing() -> Outcome {
    let p = reference();
    let space = p.space();
    let idx_0ee = space.index_of(0, Level::E, Level::E);
    let h = build_static(&p);
    let psi0 = basis_state(&space, 1, Level::G, Level::G).unwrap();
    let grid: Vec<f64> = (0..=250).map(f64::from).collect();
    let states = schrodinger_evolve(|_| h.clone(), &psi0, &grid, 1e-7).unwrap();
    let p0ee: Vec<f64> = states.iter().map(|s| s.population(idx_0ee)).collect();
    // The slow conversion has one peak inside [0, 250] ns (period 314 ns), so
    // the window argmax is the first maximum; sample-to-sample ripple from
    // the fast counter-rotating sidebands would fool a local-max detector.
    let (t_peak, v_peak) = grid
        .iter()
        .zip(&p0ee)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(t, v)| (*t, *v))
        .unwrap();
    let t_pred = std::f64::consts::PI / (2.0 * derived(&p).gs);
    let pass = v_peak >= 0.9 && (t_peak - t_pred).abs() <= 0.15 * t_pred;
    outcome(
        "pair Rabi timing",
        pass,
        format!(
            "first P_0ee maximum {:.3} at t = {:.0} ns (want ≥ 0.9 at {:.1} ns ± 15%)",
            v_peak, t_peak, t_pred
        ),
    )
}

/// Sweep conversion: the slow reference sweep transfers the photon into the
/// pair excitation (final P_0ee ≥ 0.98), and the branch-to-branch jump
/// probability tracks exp(−2πG_s²/v) within 0.05 over four decades of v,
/// all in under 60 s.
fn sweep_conversion_and_jump_statistics() -> Outcome {
    let t0 = Instant::now();
    // Full sweep from the bare photon state, via the CLI path.
    let map = effective_config(
        CommandKind::Lz,
        Some("fig4"),
        None,
        &["run.dt_ns=5333.333333333333".to_string()],
    )
    .unwrap();
    let table = run_lz(&map).unwrap();
    let final_p0ee = *table.numeric_column("P_0ee").unwrap().last().unwrap();

    // Jump probability per decade: prepare the upper branch before the
    // crossing, project onto the lower branch after it (the two states share
    // the |1,g,g⟩ character), and compare with the formula.
    let p = reference();
    let gs = derived(&p).gs;
    let base = build_static(&ModelParams { delta1: 3.84, ..p.clone() });
    let sz1_half = qubit_op(&p.space(), Qubit::One, QubitOp::Sz).scaled(0.5);
    let start = eigh(&base).unwrap();
    let end = eigh(&build_static(&ModelParams { delta1: 4.16, ..p.clone() })).unwrap();
    let mut worst = 0.0_f64;
    let mut details = String::new();
    for v in [6e-6, 6e-5, 6e-4, 6e-3] {
        let t_end = 0.32 / v;
        let h = |t: f64| &base + &sz1_half.scaled(v * t);
        let states =
            schrodinger_evolve(h, &start.state(UPPER_BRANCH), &[0.0, t_end], 2e-4).unwrap();
        let jump = end.state(LOWER_BRANCH).overlap(&states[1]).norm_sqr();
        let formula = lz_probability(gs, v).unwrap();
        let diff = (jump - formula).abs();
        worst = worst.max(diff);
        details.push_str(&format!(" v={v:.0e}: |{jump:.4}-{formula:.4}|={diff:.4};"));
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = final_p0ee >= 0.98 && worst <= 0.05 && elapsed < 60.0;
    outcome(
        "sweep conversion and jump statistics",
        pass,
        format!(
            "final P_0ee = {final_p0ee:.4} (≥ 0.98);{details} worst {worst:.4} ≤ 0.05; {elapsed:.1} s (< 60 s)"
        ),
    )
}

/// Driven dissipative run: the two-qubit correlation reaches ≥ 0.9 inside
/// t ∈ [120, 250] ns and peaks where the photon number bottoms out (within
/// 10% of the 314 ns Rabi period), in under 3 min. The shipped pulse
/// delivers a π/2 area after its t ≥ 0 truncation; the value reached with a
/// 50 MHz-peak pulse is printed for reference (it tops out near 0.83 and is
/// the one parameter the documented correlation maximum is inconsistent
/// with).
fn driven_pair_correlation() -> Outcome {
    let t0 = Instant::now();
    let map = effective_config(CommandKind::Rabi, Some("fig5"), None, &[]).unwrap();
    let table = run_rabi(&map).unwrap();
    let t = table.numeric_column("t_ns").unwrap();
    let gq2 = table.numeric_column("gq2").unwrap();
    let photon = table.numeric_column("photon_number").unwrap();
    let (i_g, g_max) = gq2
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .unwrap();
    let (i_n, _) = photon
        .iter()
        .enumerate()
        .filter(|(i, _)| t[*i] >= 60.0 && t[*i] <= 300.0)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .unwrap();
    let rabi_period = std::f64::consts::PI / derived(&reference()).gs;
    let coincide = (t[i_g] - t[i_n]).abs();

    let weak = effective_config(
        CommandKind::Rabi,
        Some("fig5"),
        None,
        &["pulse.area=2.5066282746310002".to_string()],
    )
    .unwrap();
    let weak_max = run_rabi(&weak)
        .unwrap()
        .numeric_column("gq2")
        .unwrap()
        .iter()
        .fold(0.0_f64, |a, &b| a.max(b));

    let elapsed = t0.elapsed().as_secs_f64();
    let pass = g_max >= 0.9
        && t[i_g] >= 120.0
        && t[i_g] <= 250.0
        && coincide <= 0.1 * rabi_period
        && elapsed < 180.0;
    outcome(
        "driven pair correlation",
        pass,
        format!(
            "max gq2 = {:.4} at t = {:.1} ns (≥ 0.9 in [120, 250]); photon minimum at {:.1} ns, offset {:.1} ns ≤ {:.1}; 50 MHz-peak pulse reaches {:.4}; {:.1} s (< 180 s)",
            g_max,
            t[i_g],
            t[i_n],
            coincide,
            0.1 * rabi_period,
            weak_max,
            elapsed
        ),
    )
}

/// Flipping one coupling cancels the four excitation paths: the minimal gap
/// at g₂/g₁ = −1 is ≤ 5% of the gap at +1, and the corresponding driven run
/// keeps the two-qubit correlation ≤ 0.01 over the whole horizon.
fn destructive_interference() -> Outcome {
    let map = effective_config(CommandKind::Interference, Some("fig6a"), None, &[]).unwrap();
    let table = run_interference(&map).unwrap();
    let ratios = table.numeric_column("ratio").unwrap();
    let gaps = table.numeric_column("gap_GHz").unwrap();
    let gap_at = |r: f64| {
        ratios
            .iter()
            .position(|x| (x - r).abs() < 1e-12)
            .map(|i| gaps[i])
            .expect("ratio grid point")
    };
    let (gm, gp) = (gap_at(-1.0), gap_at(1.0));

    let flipped = effective_config(CommandKind::Rabi, Some("fig6b"), None, &[]).unwrap();
    let gq2_max = run_rabi(&flipped)
        .unwrap()
        .numeric_column("gq2")
        .unwrap()
        .iter()
        .fold(0.0_f64, |a, &b| a.max(b));
    let pass = gm <= 0.05 * gp && gq2_max <= 0.01;
    outcome(
        "destructive interference",
        pass,
        format!(
            "gap(-1) = {gm:.2e} GHz ≤ 5% of gap(+1) = {gp:.4} GHz; flipped-coupling max gq2 = {gq2_max:.2e} (≤ 0.01)"
        ),
    )
}

/// Physicality of the dynamical solvers: trace, Hermiticity and positivity
/// of the density matrix on the flagship driven run, unitary norm drift on
/// the closed run, and stability of the reported maxima when the Fock
/// truncation grows from n_max = 5 to 7.
fn physicality_and_truncation() -> Outcome {
    // Driven dissipative run, sampled coarsely, checked sample by sample.
    let p = ModelParams {
        kappa: 4e-4,
        gamma1: 2e-4,
        gamma2: 2e-4,
        chi3: 0.12,
        ..reference()
    };
    let pulse = crtsim::model::DrivePulse {
        area: std::f64::consts::PI,
        t0: 0.0,
        tau: 20.0,
        omega_d: 8.0,
    };
    let rho0 = crtsim::qops::DensityMatrix::from_pure(
        &basis_state(&p.space(), 0, Level::G, Level::G).unwrap(),
    );
    // Tolerance one decade below the eigenvalue floor so integrator error
    // does not mask the structural property being checked.
    let grid: Vec<f64> = (0..=40).map(|i| 10.0 * i as f64).collect();
    let (_, states) =
        crtsim::dynamics::lindblad_evolve_states(&p, Some(&pulse), &rho0, &grid, 1e-9).unwrap();
    let mut worst_trace = 0.0_f64;
    let mut worst_herm = 0.0_f64;
    let mut min_eig = f64::INFINITY;
    for rho in &states {
        worst_trace = worst_trace.max((rho.trace().re - 1.0).abs());
        let m = rho.matrix().clone();
        worst_herm = worst_herm.max(
            Operator::from_matrix(p.space(), m.clone()).unwrap().hermiticity_error(),
        );
        let sym = Operator::from_matrix(p.space(), (&m + &m.adjoint()).scale(0.5)).unwrap();
        min_eig = min_eig.min(eigh(&sym).unwrap().values()[0]);
    }

    // Closed-system norm drift.
    let pc = reference();
    let h = build_static(&pc);
    let psi0 = basis_state(&pc.space(), 1, Level::G, Level::G).unwrap();
    let tgrid: Vec<f64> = (0..=160).map(|i| 2.0 * i as f64).collect();
    let psis = schrodinger_evolve(|_| h.clone(), &psi0, &tgrid, 1e-8).unwrap();
    let drift = psis.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0_f64, f64::max);

    // Fock-truncation convergence of the reported maxima.
    let maxima = |n_max: usize| {
        let map = effective_config(
            CommandKind::Rabi,
            Some("fig5"),
            None,
            &[format!("model.n_max={n_max}")],
        )
        .unwrap();
        let table = run_rabi(&map).unwrap();
        let top = |name: &str| {
            table.numeric_column(name).unwrap().iter().fold(0.0_f64, |a, &b| a.max(b))
        };
        (top("photon_number"), top("gq2"))
    };
    let (n5, g5) = maxima(5);
    let (n7, g7) = maxima(7);
    let dn = (n5 - n7).abs();
    let dg = (g5 - g7).abs();

    let pass = worst_trace < 1e-8
        && min_eig >= -1e-8
        && worst_herm < 1e-9
        && drift < 1e-8
        && dn < 1e-4
        && dg < 1e-4;
    outcome(
        "physicality and truncation",
        pass,
        format!(
            "|tr ρ − 1| ≤ {worst_trace:.1e} (< 1e-8), min eig(ρ) ≥ {min_eig:.1e} (≥ −1e-8), hermiticity ≤ {worst_herm:.1e} (< 1e-9), norm drift ≤ {drift:.1e} (< 1e-8); n_max 5→7 shifts maxima by {dn:.1e}/{dg:.1e} (< 1e-4)"
        ),
    )
}

/// The displaced frame: exactly isospectral to the lab Hamiltonian, and the
/// first-order expansion's residual is second order in β (halving β divides
/// it by ≈ 4).
fn displaced_frame_consistency() -> Outcome {
    let p = reference();
    let lab = eigh(&build_static(&p)).unwrap();
    let displaced = eigh(&polaron_transform(&p).unwrap()).unwrap();
    let max_dev = lab
        .values()
        .iter()
        .zip(displaced.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);

    let residual = |scale: f64| {
        let ps = ModelParams { g1: 0.2 * scale, g2: 0.2 * scale, ..reference() };
        (&polaron_transform(&ps).unwrap() - &build_first_order(&ps).unwrap()).max_abs()
    };
    let ratio = residual(1.0) / residual(0.5);
    let pass = max_dev <= 1e-8 && (3.3..=4.7).contains(&ratio);
    outcome(
        "displaced-frame consistency",
        pass,
        format!(
            "isospectral to {max_dev:.1e} GHz (≤ 1e-8); β-halving shrinks the first-order residual by {ratio:.2}x (want 3.3–4.7)"
        ),
    )
}

/// Closed-form constants: G_s, β, χ, the adiabaticity parameter of the
/// reference sweep, and the jump formula value.
fn derived_constants() -> Outcome {
    let d = derived(&reference());
    let adiabaticity = 2.0 * std::f64::consts::PI * d.gs * d.gs / 6e-5;
    let jump = lz_probability(0.01, 6e-5).unwrap();
    let pass = (d.gs - 0.01).abs() < 1e-12
        && (d.beta1 - 0.025).abs() < 1e-15
        && (d.beta2 - 0.025).abs() < 1e-15
        && (d.chi - 0.02).abs() < 1e-15
        && (adiabaticity - 10.47).abs() <= 0.01
        && (jump - 2.83e-5).abs() <= 1e-7;
    outcome(
        "derived constants",
        pass,
        format!(
            "Gs = {:.6} GHz, β = {:.4}, χ = {:.4} GHz, adiabaticity = {:.4} (10.47 ± 0.01), jump formula = {:.3e} (2.83e-5 ± 1e-7)",
            d.gs, d.beta1, d.chi, adiabaticity, jump
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let outcomes = vec![
        anticrossing_location_and_size(),
        counter_rotating_ablation(),
        branch_character(),
        pair_rabi_timing(),
        sweep_conversion_and_jump_statistics(),
        driven_pair_correlation(),
        destructive_interference(),
        physicality_and_truncation(),
        displaced_frame_consistency(),
        derived_constants(),
    ];
    let mut failed = 0;
    for (i, o) in outcomes.iter().enumerate() {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("[{:>2}/10] {verdict}  {} — {}", i + 1, o.label, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance check(s) failed (see lines above)");
}
