use kamcert_cli::config::{GeometryTask, Mode, RunConfig, SystemSpec, Workflow};
use kamcert_cli::{preset, CliError, PRESETS};
use kamcert_core::geometry::DomainSpec;
use proptest::prelude::*;

fn schema(name: &str) -> jsonschema::Validator {
    let path = format!("{}/schemas/{name}", env!("CARGO_MANIFEST_DIR"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&v).unwrap()
}

fn round_trips(cfg: RunConfig) {
    let a = cfg.normalize().unwrap();
    let text = a.to_json();
    let b = RunConfig::parse(&text).unwrap();
    assert_eq!(a, b);
    assert_eq!(b.clone().normalize().unwrap().to_json(), text);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let errs: Vec<String> = schema("run-config.schema.json").iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errs.is_empty(), "{errs:?}");
}

#[test]
fn presets_and_shipped_configs_round_trip() {
    for (name, _) in PRESETS {
        round_trips(preset(name).unwrap());
    }
    let dir = format!("{}/configs", env!("CARGO_MANIFEST_DIR"));
    for entry in std::fs::read_dir(dir).unwrap() {
        round_trips(RunConfig::load(&entry.unwrap().path()).unwrap());
    }
}

#[test]
fn defaults_fill_radii() {
    let cfg = RunConfig::new(Workflow::Iterate).normalize().unwrap();
    assert_eq!(cfg.r_bar, Some(cfg.rho));
    assert_eq!(cfg.rho_hat, Some(0.5 * cfg.rho));
    assert_eq!(cfg.d, None);
    let cfg = preset("pendulum2d").unwrap().normalize().unwrap();
    assert_eq!(cfg.d, Some(2));
    assert!(cfg.lattice_per_axis.is_some());
}

#[test]
fn radii_orderings_are_validated() {
    let bad = |f: &dyn Fn(&mut RunConfig)| {
        let mut c = preset("pendulum2d").unwrap();
        f(&mut c);
        match c.normalize() {
            Err(CliError::Usage(m)) => m,
            other => panic!("accepted: {other:?}"),
        }
    };
    assert!(bad(&|c| c.r_bar = Some(0.06)).contains("radii"));
    assert!(bad(&|c| c.rho_hat = Some(0.05)).contains("radii"));
    assert!(bad(&|c| c.rho_hat = Some(0.0)).contains("radii"));
    assert!(bad(&|c| {
        c.r_bar = Some(0.02);
        c.rho_hat = Some(0.03)
    })
    .contains("radii"));
    assert!(bad(&|c| c.s_star = 0.6).contains("s_star"));
    assert!(bad(&|c| c.tau = 0.5).contains("tau must exceed d−1"));
    assert!(bad(&|c| c.epsilon = -1.0).contains("epsilon"));
    assert!(bad(&|c| c.d = Some(3)).contains("dimension"));
}

#[test]
fn unknown_fields_and_presets_are_rejected() {
    assert!(RunConfig::parse(r#"{"workflow": "iterate", "epsilonn": 1}"#).is_err());
    let cfg = RunConfig::parse(r#"{"workflow": "iterate", "system": {"kind": "preset", "name": "duffing"}}"#).unwrap();
    assert!(cfg.normalize().is_err());
}

fn arb_config() -> impl Strategy<Value = RunConfig> {
    (
        (0.0f64..1e-2, 0.1f64..3.0, 0.05f64..0.95, 0.01f64..2.0, 0.1f64..1.0, 0.05f64..0.95),
        (0usize..20, 1usize..64, 2usize..5, prop::bool::ANY, any::<u64>(), prop::option::of(1e-3f64..1.0)),
        (prop::option::of(prop::collection::vec(-3.0f64..3.0, 2)), prop::bool::ANY, 0.01f64..1.0),
    )
        .prop_map(|((eps, s, sf, rho, rb, rh), (j_max, k_max, degree, ov, seed, alpha), (anchor, smooth, r))| {
            let mut c = RunConfig::new(Workflow::Iterate);
            c.system = Some(SystemSpec::Preset { name: "pendulum2d".into(), anchor });
            c.epsilon = eps;
            c.s = s;
            c.s_star = sf * s;
            c.rho = rho;
            c.r_bar = Some(rb * rho);
            c.rho_hat = Some(rh * rb * rho);
            c.j_max = j_max;
            c.k_max = k_max;
            c.degree = degree;
            c.override_conditions = ov;
            c.seed = seed;
            c.alpha = alpha;
            c.mode = if smooth { Mode::Smooth } else { Mode::General };
            c.domain = Some(DomainSpec::Box { lo: vec![0.0, -r], hi: vec![r, 0.0] });
            c.geometry = Some(GeometryTask::Tube {
                surface: kamcert_core::geometry::SurfaceSpec::Sphere { center: vec![0.1, 0.2], radius: r },
                rho: 0.5 * r,
            });
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_accepted_config_round_trips(cfg in arb_config()) {
        let a = cfg.normalize().unwrap();
        let text = a.to_json();
        let b = RunConfig::parse(&text).unwrap().normalize().unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(b.to_json(), text);
    }
}
