//! The shipped fixtures are the case-study builders written out; they must
//! parse back to exactly the same problems.

use std::path::PathBuf;

use momentlmi_core::casestudies::{
    build_bolza, build_eig_assign, build_lqr, build_occtraj, build_saturation_cells,
};
use momentlmi_core::problem::{read_problem, Problem};
use momentlmi_core::spectra::{exponential_spectrahedron, pillow};

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn load(name: &str) -> Problem {
    read_problem(&dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn generated_fixtures_match_builders() {
    let cases = [
        ("eig2.txt", Problem::Pop(build_eig_assign(2))),
        ("eig3.txt", Problem::Pop(build_eig_assign(3))),
        ("eig4.txt", Problem::Pop(build_eig_assign(4))),
        ("bolza.txt", Problem::Gmp(build_bolza())),
        ("lqr.txt", Problem::Gmp(build_lqr())),
        ("occtraj2.txt", Problem::Gmp(build_occtraj())),
        ("saturation.txt", Problem::Gmp(build_saturation_cells())),
        ("pillow.txt", Problem::Pencil(pillow())),
        ("expo3.txt", Problem::Pencil(exponential_spectrahedron(3))),
    ];
    for (name, want) in cases {
        assert_eq!(load(name), want, "{name}");
    }
}

#[test]
fn every_fixture_round_trips() {
    let mut seen = 0;
    for e in std::fs::read_dir(dir()).unwrap() {
        let path = e.unwrap().path();
        let p = read_problem(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = Problem::parse(&p.to_text()).unwrap();
        assert_eq!(again, p, "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 12);
}
