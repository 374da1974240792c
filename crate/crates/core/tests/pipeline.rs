//! Full solves whose exact solution lies in the discrete space.

use std::io::Write;

use boltzdg::analysis::{ConstantSolution, NormEvaluator};
use boltzdg::angular::PatchMap;
use boltzdg::solver::SolverOptions;
use boltzdg::study::{
    run_case, AngularSpec, CaseSpec, EnergySpec, MeshSpec, ModelSpec, SourceSpec,
};
use proptest::prelude::*;

fn constant_case(dim: usize, mesh: MeshSpec, model: ModelSpec, alpha: f64, value: f64) -> CaseSpec {
    CaseSpec {
        label: "constant".into(),
        dim,
        mesh,
        degree: Some(1),
        angular: AngularSpec {
            patches_per_edge: 1,
            degree: 1,
            map: Some(PatchMap::Equiangular),
        },
        energy: EnergySpec::Monoenergetic { energy: 1.0 },
        model,
        source: SourceSpec::Constant {
            f: alpha * value,
            g: value,
        },
    }
}

fn constant_error(spec: &CaseSpec, value: f64) -> f64 {
    let out = run_case(spec, &SolverOptions::default()).unwrap();
    assert!(out.report.converged());
    NormEvaluator::new(&out.disc)
        .unwrap()
        .errors(&out.flux, Some(&ConstantSolution(value)))
        .unwrap()
        .l2
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn absorber_reproduces_constants(alpha in 0.1f64..5.0, value in -3.0f64..3.0, dim in 2usize..=3) {
        let spec = constant_case(dim, MeshSpec::UnitCube { cells: 2 }, ModelSpec::PureAbsorber { alpha }, alpha, value);
        prop_assert!(constant_error(&spec, value) <= 1e-11 * (1.0 + value.abs()));
    }

    #[test]
    fn isotropic_scattering_reproduces_constants(alpha in 0.1f64..2.0, sigma_s in 0.0f64..2.0, value in -3.0f64..3.0) {
        let model = ModelSpec::Isotropic { alpha, sigma_s };
        let spec = constant_case(2, MeshSpec::UnitCube { cells: 3 }, model, alpha, value);
        prop_assert!(constant_error(&spec, value) <= 1e-9 * (1.0 + value.abs()));
    }
}

#[test]
fn non_convex_mesh_file_reproduces_constants() {
    let mesh = r#"{
        "vertices": [[0, 0], [1, 0], [1, 0.5], [0.5, 0.5], [0.5, 1], [0, 1], [1, 1]],
        "elements": [[0, 1, 2, 3, 4, 5], [3, 2, 6, 4]]
    }"#;
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(mesh.as_bytes()).unwrap();
    let spec = constant_case(
        2,
        MeshSpec::File {
            path: file.path().to_path_buf(),
        },
        ModelSpec::Isotropic {
            alpha: 1.0,
            sigma_s: 0.5,
        },
        1.0,
        2.0,
    );
    assert!(constant_error(&spec, 2.0) <= 1e-9);
}

#[test]
fn mesh_dimension_must_match_problem_dimension() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(
        br#"{ "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]], "elements": [[0, 1, 2, 3]] }"#,
    )
    .unwrap();
    let mut spec = constant_case(
        3,
        MeshSpec::File {
            path: file.path().to_path_buf(),
        },
        ModelSpec::PureAbsorber { alpha: 1.0 },
        1.0,
        1.0,
    );
    spec.label = "mismatch".into();
    assert!(spec.discretise().is_err());
}
