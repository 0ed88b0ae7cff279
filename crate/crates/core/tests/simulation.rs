mod common;

use common::{abd_generator, issuers_for_exposure, recovery_model};
use ratemig::events::ObservationWindow;
use ratemig::simulation::{hazard_trajectory, mc_occupancy, pathwise_survival};
use ratemig::{
    compose, gengen_to_generator, mexp, mle_stationary, parse_events, sample_path, simulate_events,
    write_events, GeneratorMatrix, GeneratorSchedule,
};

fn stationary_abd() -> GeneratorMatrix {
    abd_generator([-3.0 / 9.5, 3.0 / 9.5, 0.0], [0.1, -0.2, 0.1])
}

fn band(p: f64, n: usize, sigmas: f64) -> f64 {
    sigmas * (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn default_fraction_from_a_matches_printed_one_year_value() {
    let schedule = GeneratorSchedule::stationary(stationary_abd()).unwrap();
    let n = 1_000_000;
    let occ = mc_occupancy(&schedule, 0, 1.0, n, 8).unwrap();
    let p = mexp(&stationary_abd(), 1.0).unwrap().get(0, 2);
    assert!((p - 0.0134).abs() < 5e-5);
    assert!((occ[2] - p).abs() <= band(p, n, 3.0), "{} vs {p}", occ[2]);
}

#[test]
fn occupancy_matches_exponential_in_every_cell() {
    let gen = stationary_abd();
    let schedule = GeneratorSchedule::stationary(gen.clone()).unwrap();
    let n = 200_000;
    let exact = mexp(&gen, 2.0).unwrap();
    for r0 in 0..3 {
        let occ = mc_occupancy(&schedule, r0, 2.0, n, 11).unwrap();
        for (j, &p_hat) in occ.iter().enumerate() {
            let p = exact.get(r0, j);
            assert!(
                (p_hat - p).abs() <= band(p, n, 4.0),
                "cell ({r0}, {j}): {p_hat} vs {p}"
            );
        }
    }
}

#[test]
fn piecewise_schedule_occupancy_matches_composed_matrices() {
    let first = stationary_abd();
    let second = abd_generator([-0.5, 0.4, 0.1], [0.3, -0.5, 0.2]);
    let schedule =
        GeneratorSchedule::new(vec![(0.0, first.clone()), (0.75, second.clone())]).unwrap();
    let exact = compose(&mexp(&first, 0.75).unwrap(), &mexp(&second, 1.25).unwrap()).unwrap();
    let n = 200_000;
    let occ = mc_occupancy(&schedule, 0, 2.0, n, 3).unwrap();
    for (j, &p_hat) in occ.iter().enumerate() {
        let p = exact.get(0, j);
        assert!(
            (p_hat - p).abs() <= band(p, n, 4.0),
            "state {j}: {p_hat} vs {p}"
        );
    }
}

#[test]
fn pathwise_survival_matches_analytic_survival() {
    let gen = stationary_abd();
    let schedule = GeneratorSchedule::stationary(gen.clone()).unwrap();
    let n = 200_000;
    for r0 in 0..2 {
        let q = 1.0 - mexp(&gen, 5.0).unwrap().get(r0, 2);
        let est = pathwise_survival(&schedule, r0, 5.0, n, 21).unwrap();
        assert!(
            (est.mean - q).abs() <= band(q, n, 4.0),
            "from {r0}: {} vs {q}",
            est.mean
        );
        assert!((est.mean - q).abs() <= 4.0 * est.std_error);
    }
}

#[test]
fn hazard_follows_rating_and_schedule() {
    let gen = stationary_abd();
    let schedule = GeneratorSchedule::stationary(gen).unwrap();
    for seed in 0..50 {
        let path = sample_path(&schedule, 0, 10.0, seed).unwrap();
        for (t, state, h) in hazard_trajectory(&path, &schedule) {
            assert_eq!(path.state_at(t), state);
            assert_eq!(h, [0.0, 0.1, 0.0][state]);
        }
    }
}

#[test]
fn simulated_paths_respect_path_invariants() {
    let schedule =
        GeneratorSchedule::stationary(gengen_to_generator(&recovery_model()).unwrap()).unwrap();
    for seed in 0..200 {
        let path = sample_path(&schedule, 1, 20.0, seed).unwrap();
        assert_eq!(path.jumps[0], (0.0, 1));
        for w in path.jumps.windows(2) {
            assert!(w[0].0 < w[1].0);
            assert_ne!(w[0].1, w[1].1);
            assert_ne!(w[0].1, 4);
        }
        assert_eq!(path.defaulted, path.final_state() == 4);
    }
}

#[test]
fn event_files_round_trip() {
    let schedule = GeneratorSchedule::stationary(stationary_abd()).unwrap();
    let table = simulate_events(&schedule, 300, 5.0, 0.1, 17).unwrap();
    let mut buf = Vec::new();
    write_events(&mut buf, &table).unwrap();
    let back = parse_events(buf.as_slice(), table.scale().clone()).unwrap();
    assert_eq!(back.events(), table.events());
    let mut again = Vec::new();
    write_events(&mut again, &back).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn same_seed_gives_identical_files() {
    let schedule = GeneratorSchedule::stationary(stationary_abd()).unwrap();
    let render = |seed| {
        let mut buf = Vec::new();
        write_events(
            &mut buf,
            &simulate_events(&schedule, 500, 5.0, 0.2, seed).unwrap(),
        )
        .unwrap();
        buf
    };
    assert_eq!(render(4), render(4));
    assert_ne!(render(4), render(5));
}

#[test]
fn simulate_then_estimate_recovers_the_generator() {
    let gen = stationary_abd();
    let n = issuers_for_exposure(&gen, 10.0, 50_000.0);
    let schedule = GeneratorSchedule::stationary(gen.clone()).unwrap();
    let table = simulate_events(&schedule, n, 10.0, 0.05, 99).unwrap();
    let window = ObservationWindow::new(0.0, 10.0).unwrap();
    let r = mle_stationary(&table, &window).unwrap();
    let est = r.generator.unwrap();
    for i in 0..2 {
        for j in 0..3 {
            let want = gen.get(i, j);
            if i != j && want > 0.0 {
                let sd = (want / r.exposure[i]).sqrt();
                assert!((est.get(i, j) - want).abs() <= 4.0 * sd, "({i}, {j})");
            } else if i != j {
                assert_eq!(est.get(i, j), 0.0);
            }
        }
    }
}
