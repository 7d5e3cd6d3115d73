"""Smoke test for the momentlmi extension.

Build and install it first:
    pip install --no-build-isolation -e crates/python
"""

import math
import pathlib

import momentlmi

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    phi = (1 + math.sqrt(5)) / 2

    polyopt = momentlmi.Problem.read(FIXTURES / "polyopt.txt")
    assert polyopt.kind == "pop"
    rep = polyopt.solve(order=2, extract=True)
    assert rep["status"] == "optimal"
    close(rep["bound"], -phi, 1e-6)
    assert rep["flat"] == "true"
    x = [float(v) for v in rep["atom1"].split()]
    close(x[0], 1 - phi, 1e-4)
    close(x[1], phi, 1e-4)
    close(rep["moments"]["x"][(0, 1)], phi, 1e-4)

    sdp = momentlmi.Problem.read(FIXTURES / "irrat1.txt")
    close(sdp.solve()["bound"], math.sqrt(2), 1e-6)

    pillow = momentlmi.case_study("pillow")
    assert pillow.defining_polynomials()[2] == "1 - x1^2 - x2^2 - x3^2 + 2*x1*x2*x3"
    expo = momentlmi.case_study("exponential", 3)
    assert expo.contains([4, 16, 256]) and not expo.contains([4, 16, 255.9])

    occ = momentlmi.case_study("occtraj")
    rep = occ.solve(order=4, min_mass="mu")
    close(rep["bound"], 0.375, 1e-6)
    close(float(rep["mu.mass"]), math.log(2), 1e-4)

    eig = momentlmi.case_study("eig_assign", 3)
    rep = eig.solve(extract=True)
    assert rep["ranks"].split()[-1] == "1", rep["ranks"]

    atoms = [([0.5, -0.25], 0.4), ([-0.3, 0.8], 0.6)]
    y = momentlmi.moments_from_atoms(2, 6, atoms)
    assert len(y) == len(momentlmi.monomials(2, 6)) == 28
    got = sorted(momentlmi.extract_atoms(2, y, 3))
    for (p, w), (q, v) in zip(got, sorted(atoms)):
        close(w, v, 1e-6)
        for a, b in zip(p, q):
            close(a, b, 1e-6)
    assert momentlmi.rank_sequence(2, y, 3) == [1, 2, 2, 2]

    disk = momentlmi.Problem.parse("kind = pop\nvars = a b\n[constraints]\n1 - a^2 - b^2 >= 0\n")
    pts = disk.shadow(order=1, directions=4)
    close(pts[1][3], 1.0, 1e-6)

    text = polyopt.to_text()
    assert momentlmi.Problem.parse(text).to_text() == text
    try:
        momentlmi.Problem.parse("kind = pop\nvars = x\n[objective]\ny\n")
    except ValueError as e:
        assert "line 4" in str(e), e
    else:
        raise AssertionError("bad problem parsed")
    try:
        polyopt.solve(max_iter=2, min_mass="x")
    except ValueError:
        pass
    else:
        raise AssertionError("min_mass on a pop problem accepted")

    print("momentlmi smoke test passed")


if __name__ == "__main__":
    main()
