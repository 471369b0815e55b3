import json
import subprocess
import sys
from fractions import Fraction

import pytest

from apckit import io as fio
from apckit.covers import ScaleSequence, interval_oracle, verify_apc_witness
from apckit.exact import root_of
from apckit.metric import InputError, interval_window, matrix_space
from apckit.trees import random_tree


def run_cli(*argv, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "apckit", *argv],
        capture_output=True, text=True, cwd=cwd,
    )


class TestScalarCodec:
    def test_roundtrip(self):
        for x in (0, 5, Fraction(3, 2), root_of(2), root_of(Fraction(5, 4))):
            assert fio.decode_scalar(fio.encode_scalar(x)) == x

    def test_integral_fraction_compact(self):
        assert fio.encode_scalar(Fraction(4, 2)) == 2


class TestSpaceFiles:
    def test_matrix_roundtrip_byte_stable(self, tmp_path):
        space = matrix_space(["a", "b"], [[0, 2], [2, 0]], basepoint="a")
        p = tmp_path / "s.json"
        fio.save_space(str(p), space)
        loaded = fio.load_space(str(p))
        p2 = tmp_path / "s2.json"
        fio.save_space(str(p2), loaded)
        assert p.read_bytes() == p2.read_bytes()

    def test_generator_file(self, tmp_path):
        p = tmp_path / "g.json"
        fio.write_file(
            str(p),
            {"metric": {"kind": "generator",
                        "spec": {"kind": "interval", "lo": 0, "hi": 9}}},
        )
        space = fio.load_space(str(p))
        assert len(space) == 10

    def test_unknown_field_rejected(self, tmp_path):
        p = tmp_path / "bad.json"
        fio.write_file(str(p), {"metric": {"kind": "matrix", "rows": []},
                                "points": [], "bogus": 1})
        with pytest.raises(InputError) as e:
            fio.load_space(str(p))
        assert "bogus" in str(e.value)


class TestWitnessFiles:
    def test_roundtrip(self, tmp_path):
        space = interval_window(0, 9)
        s = ScaleSequence([1, 2])
        w = interval_oracle(space).checked(s)
        p = tmp_path / "w.json"
        fio.save_witness(str(p), s, w)
        s2, w2 = fio.load_witness(str(p))
        assert verify_apc_witness(space, s2, w2).ok
        p2 = tmp_path / "w2.json"
        fio.save_witness(str(p2), s2, w2)
        assert p.read_bytes() == p2.read_bytes()


class TestTreeFiles:
    def test_roundtrip(self, tmp_path):
        t = random_tree(12)
        p = tmp_path / "t.json"
        fio.save_tree(str(p), t)
        t2 = fio.load_tree(str(p))
        assert t2.parent == t.parent


class TestGroupFiles:
    def test_zd(self, tmp_path):
        p = tmp_path / "g.json"
        fio.write_file(str(p), {
            "model": "Z^1",
            "generators": [{"elem": [1], "weight": 1}, {"elem": [-1], "weight": 1}],
            "radius": 3,
        })
        win = fio.load_group_window(str(p))
        assert len(win.points) == 7

    def test_free(self, tmp_path):
        p = tmp_path / "g.json"
        fio.write_file(str(p), {
            "model": "free-2",
            "generators": [{"elem": [1], "weight": 1}, {"elem": [2], "weight": 1}],
            "radius": 2,
        })
        win = fio.load_group_window(str(p))
        assert len(win.points) == 17

    def test_product_model(self, tmp_path):
        p = tmp_path / "g.json"
        fio.write_file(str(p), {
            "model": {"product": ["Z^1", "Z^1"]},
            "generators": [
                {"elem": [[1], [0]], "weight": 1},
                {"elem": [[0], [1]], "weight": 1},
            ],
            "radius": 2,
        })
        win = fio.load_group_window(str(p))
        assert len(win.points) == 13  # l1 ball of radius 2 in Z^2

    def test_freeprod_model(self, tmp_path):
        p = tmp_path / "g.json"
        fio.write_file(str(p), {
            "model": {"freeprod": ["Z^1", "Z^1"]},
            "generators": [
                {"elem": [[0, [1]]], "weight": 1},
                {"elem": [[1, [1]]], "weight": 1},
            ],
            "radius": 2,
        })
        win = fio.load_group_window(str(p))
        assert len(win.points) == 17  # free product of two Z's is F_2

    def test_table_model(self, tmp_path):
        p = tmp_path / "g.json"
        elems = list(range(4))
        rows = [[a, b, (a + b) % 4] for a in elems for b in elems]
        fio.write_file(str(p), {
            "model": {"table": {"elements": elems, "rows": rows, "identity": 0}},
            "generators": [{"elem": 1, "weight": 1}, {"elem": 3, "weight": 1}],
            "radius": 2,
        })
        win = fio.load_group_window(str(p))
        assert len(win.points) == 4  # the whole cyclic group within radius 2

    def test_generator_points_mismatch_rejected(self, tmp_path):
        p = tmp_path / "s.json"
        fio.write_file(str(p), {
            "points": [0, 1, 2],
            "metric": {"kind": "generator", "spec": {"kind": "path", "n": 5}},
        })
        import pytest as _pytest

        with _pytest.raises(InputError):
            fio.load_space(str(p))


class TestDotExports:
    def test_proximity_dot(self):
        space = interval_window(0, 3)
        dot = fio.proximity_dot(space, 1)
        assert dot.startswith("graph proximity {")
        assert '"0" -- "1"' in dot

    def test_tree_dot_colored(self):
        from apckit.trees import tree_cover

        t = random_tree(10)
        dot = fio.tree_dot(t, tree_cover(t, 2).families())
        assert "fillcolor" in dot


class TestCli:
    def _space_file(self, tmp_path, spec):
        p = tmp_path / "space.json"
        fio.write_file(str(p), {"metric": {"kind": "generator", "spec": spec}})
        return str(p)

    def test_space_validate_ok(self, tmp_path):
        f = self._space_file(tmp_path, {"kind": "grid", "shape": [3, 3]})
        r = run_cli("space", "validate", "--in", f)
        assert r.returncode == 0
        assert json.loads(r.stdout)["valid"]

    def test_space_validate_bad_metric(self, tmp_path):
        p = tmp_path / "bad.json"
        fio.write_file(str(p), {
            "points": ["a", "b", "c"],
            "metric": {"kind": "matrix",
                       "rows": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]},
        })
        r = run_cli("space", "validate", "--in", str(p))
        assert r.returncode == 1

    def test_malformed_input_exit_2(self, tmp_path):
        p = tmp_path / "junk.json"
        p.write_text("{not json")
        r = run_cli("space", "validate", "--in", str(p))
        assert r.returncode == 2

    def test_cover_solve_and_verify_roundtrip(self, tmp_path):
        f = self._space_file(tmp_path, {"kind": "path", "n": 5})
        out = tmp_path / "w.json"
        r = run_cli("cover", "solve", "--space", f, "--R", "1", "--B", "0",
                    "--out", str(out))
        assert r.returncode == 0
        assert json.loads(r.stdout)["n"] == 2
        r2 = run_cli("cover", "verify", "--space", f, "--witness", str(out))
        assert r2.returncode == 0

    def test_cover_verify_tampered_exit_1(self, tmp_path):
        f = self._space_file(tmp_path, {"kind": "path", "n": 5})
        out = tmp_path / "w.json"
        run_cli("cover", "solve", "--space", f, "--R", "1", "--B", "0",
                "--out", str(out))
        obj = json.loads(out.read_text())
        # move a point from one set of the first family into another set
        fam = obj["families"][0]["sets"]
        moved = fam[0].pop()
        fam[1].append(moved)
        obj["families"][0]["sets"] = [s for s in fam if s]
        out.write_text(json.dumps(obj))
        r = run_cli("cover", "verify", "--space", f, "--witness", str(out))
        assert r.returncode == 1
        report = json.loads(r.stdout)
        assert report["violations"], "tampering must be reported with a named violation"
        assert all(v["condition"] in ("disjointness", "mesh", "coverage")
                   for v in report["violations"])

    def test_product_command_verifies_and_is_deterministic(self, tmp_path):
        f = self._space_file(tmp_path, {"kind": "interval", "lo": 0, "hi": 12})
        o1, o2 = tmp_path / "w1.json", tmp_path / "w2.json"
        r1 = run_cli("product", "--space-x", f, "--space-y", f,
                     "--scales", "1,2", "--out", str(o1))
        r2 = run_cli("product", "--space-x", f, "--space-y", f,
                     "--scales", "1,2", "--out", str(o2))
        assert r1.returncode == 0 and r2.returncode == 0
        assert o1.read_bytes() == o2.read_bytes()

    def test_fibering_command(self, tmp_path):
        f = self._space_file(tmp_path, {"kind": "interval", "lo": 0, "hi": 8})
        r = run_cli("fibering", "--space-x", f, "--space-y", f, "--scales", "1,2")
        assert r.returncode == 0

    def test_decompose_command(self, tmp_path):
        f = self._space_file(tmp_path, {"kind": "interval", "lo": 0, "hi": 11})
        hyp = tmp_path / "hyp.json"
        # two parity families of width-4 blocks, 4 apart, as the hypothesis
        fio.write_file(str(hyp), {
            "scales": [1, 2],
            "families": [
                {"R": 1, "mesh": 3, "sets": [[0, 1, 2, 3], [8, 9, 10, 11]]},
                {"R": 2, "mesh": 3, "sets": [[4, 5, 6, 7]]},
            ],
        })
        out = tmp_path / "w.json"
        r = run_cli("decompose", "--space", f, "--witness", str(hyp),
                    "--k", "2", "--subcover-mesh", "1,1",
                    "--scales", "1,1", "--out", str(out))
        assert r.returncode == 0, r.stderr
        r2 = run_cli("cover", "verify", "--space", f, "--witness", str(out))
        assert r2.returncode == 0

    def test_space_export_dot(self, tmp_path):
        f = self._space_file(tmp_path, {"kind": "path", "n": 4})
        dot = tmp_path / "p.dot"
        r = run_cli("space", "export", "--in", f, "--R", "1", "--dot", str(dot))
        assert r.returncode == 0
        assert "--" in dot.read_text()

    def test_freeprod_window_flag_shorthand(self, tmp_path):
        p = tmp_path / "base.json"
        fio.write_file(str(p), {
            "points": ["x0", "a"],
            "metric": {"kind": "matrix", "rows": [[0, 1], [1, 0]]},
            "basepoint": "x0",
        })
        r = run_cli("freeprod", "window", "--base", str(p), "--window", "3,3")
        assert r.returncode == 0
        assert json.loads(r.stdout)["words"] == 4

    def test_freeprod_qi_check_command(self, tmp_path):
        p = tmp_path / "base.json"
        fio.write_file(str(p), {
            "points": ["x0", "a", "b"],
            "metric": {"kind": "matrix",
                       "rows": [[0, 1, 2], [1, 0, 2], [2, 2, 0]]},
            "basepoint": "x0",
        })
        r = run_cli("freeprod", "qi-check", "--base", str(p), "-m", "3", "-L", "9",
                    "-M", "2")
        assert r.returncode == 0, r.stderr
        assert json.loads(r.stdout)["ok"]

    def test_tree_cover_command(self, tmp_path):
        t = random_tree(20)
        tf = tmp_path / "t.json"
        fio.save_tree(str(tf), t)
        out = tmp_path / "w.json"
        dot = tmp_path / "t.dot"
        r = run_cli("tree-cover", "--tree", str(tf), "--r", "2",
                    "--out", str(out), "--dot", str(dot))
        assert r.returncode == 0
        assert dot.read_text().startswith("graph tree {")

    def test_freeprod_cover_command(self, tmp_path):
        p = tmp_path / "base.json"
        fio.write_file(str(p), {
            "points": ["x0", "a", "b"],
            "metric": {"kind": "matrix",
                       "rows": [[0, 1, 2], [1, 0, 2], [2, 2, 0]]},
            "basepoint": "x0",
        })
        r = run_cli("freeprod", "cover", "--base", str(p), "-m", "2", "-L", "4",
                    "--margin", "2", "--scales", "1,1")
        assert r.returncode == 0, r.stderr

    def test_group_pipeline_command(self, tmp_path):
        r = run_cli("group", "pipeline", "--kind", "z2-extension",
                    "--radius", "6", "--scales", "1,2")
        assert r.returncode == 0, r.stderr

    def test_demo_hypercubes_deterministic(self, tmp_path):
        o1, o2 = tmp_path / "d1.json", tmp_path / "d2.json"
        r1 = run_cli("demo", "hypercubes", "--max-dim", "3", "--out", str(o1))
        r2 = run_cli("demo", "hypercubes", "--max-dim", "3", "--out", str(o2))
        assert r1.returncode == 0 and r2.returncode == 0
        assert o1.read_bytes() == o2.read_bytes()
