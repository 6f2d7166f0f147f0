"""File formats, bond inference, polling, and overlay rebase."""
import os
import random

import pytest

import gen
from oracles import brute_force_pairs
from snbviz import model
from snbviz.ingest import (
    ParseError,
    WatchState,
    infer_bonds,
    parse_snbg,
    parse_xyz,
    poll,
    rebase,
    serialize_snbg,
)
from snbviz.model import Atom, Bond, Snapshot, Vec3


def err_code(fn, *args):
    with pytest.raises(ParseError) as e:
        fn(*args)
    return e.value.code


class TestParseSnbg:
    def test_single_atom(self):
        s = parse_snbg("ATOMS 1\n1 0.0 0.0 0.0 C\nBONDS 0")
        assert s.atoms == (Atom(1, Vec3(0, 0, 0), "C"),)
        assert s.bonds == ()

    def test_empty(self):
        assert parse_snbg("ATOMS 0\nBONDS 0") == Snapshot(0, (), ())

    def test_default_element_is_x(self):
        s = parse_snbg("ATOMS 1\n7 1 2 3\nBONDS 0")
        assert s.atoms[0].element == "X"

    def test_comments_and_blanks_ignored(self):
        text = "# header\n\nATOMS 1\n  # indented comment\n1 0 0 0 N\n\nBONDS 1\n# pair\n1 1000\n"
        with pytest.raises(ParseError):
            parse_snbg(text)  # bond references unknown atom 1000
        text = "# header\n\nATOMS 2\n1 0 0 0 N\n2 1 0 0\nBONDS 1\n2 1\n"
        s = parse_snbg(text)
        assert s.bonds == (Bond(1, 2),)

    def test_unknown_atom_in_bond(self):
        assert err_code(parse_snbg, "ATOMS 1\n1 0 0 0\nBONDS 1\n1 2") == "unknown_atom_in_bond"

    def test_duplicate_atom_id(self):
        assert err_code(parse_snbg, "ATOMS 2\n1 0 0 0\n1 1 1 1\nBONDS 0") == "duplicate_atom_id"

    def test_count_mismatch_fewer_atoms(self):
        assert err_code(parse_snbg, "ATOMS 2\n1 0 0 0\nBONDS 0") == "count_mismatch"

    def test_count_mismatch_more_atoms(self):
        assert err_code(parse_snbg, "ATOMS 1\n1 0 0 0\n2 0 0 1\nBONDS 0") == "count_mismatch"

    def test_count_mismatch_missing_bond_rows(self):
        assert err_code(parse_snbg, "ATOMS 2\n1 0 0 0\n2 1 0 0\nBONDS 2\n1 2") == "count_mismatch"

    def test_count_mismatch_trailing_rows(self):
        assert err_code(parse_snbg, "ATOMS 2\n1 0 0 0\n2 1 0 0\nBONDS 1\n1 2\n2 1") == "count_mismatch"

    def test_syntax_errors(self):
        assert err_code(parse_snbg, "NOPE 1\nBONDS 0") == "syntax_error"
        assert err_code(parse_snbg, "ATOMS x\nBONDS 0") == "syntax_error"
        assert err_code(parse_snbg, "ATOMS 1\n1 a 0 0\nBONDS 0") == "syntax_error"
        assert err_code(parse_snbg, "ATOMS 1\n1 0 0 0 c\nBONDS 0") == "syntax_error"
        assert err_code(parse_snbg, "ATOMS 1\n1 0 0 0\nBONDS 1\n1 1") == "syntax_error"
        assert err_code(parse_snbg, "ATOMS 1\n1 inf 0 0\nBONDS 0") == "syntax_error"
        assert err_code(parse_snbg, "ATOMS 2\n1 0 0 0\n2 1 0 0\nBONDS 2\n1 2\n2 1") == "syntax_error"

    def test_error_line_numbers(self):
        with pytest.raises(ParseError) as e:
            parse_snbg("# c\nATOMS 2\n1 0 0 0\n1 0 0 1\nBONDS 0")
        assert e.value.line == 4


class TestSerializeSnbg:
    def test_empty(self):
        assert serialize_snbg(Snapshot(0, (), ())) == "ATOMS 0\nBONDS 0\n"

    def test_rounding_half_to_even_at_4_places(self):
        s = Snapshot(0, (Atom(1, Vec3(1.00005, 0.0, 0.0), "X"),), ())
        assert serialize_snbg(s) == "ATOMS 1\n1 1.0000 0.0000 0.0000 X\nBONDS 0\n"
        s = Snapshot(0, (Atom(1, Vec3(0.00015, 0.0, 0.0), "X"),), ())
        assert "0.0002 0.0000 0.0000" in serialize_snbg(s)

    def test_canonical_order(self):
        s = Snapshot(0,
                     (Atom(2, Vec3(0, 0, 0), "N"), Atom(1, Vec3(1, 0, 0), "C"),
                      Atom(10, Vec3(2, 0, 0), "O")),
                     (Bond(2, 10), Bond(1, 2)))
        text = serialize_snbg(s)
        assert text == ("ATOMS 3\n1 1.0000 0.0000 0.0000 C\n2 0.0000 0.0000 0.0000 N\n"
                        "10 2.0000 0.0000 0.0000 O\nBONDS 2\n1 2\n2 10\n")

    def test_structural_round_trip_random(self):
        rng = random.Random(101)
        for _ in range(100):
            s = gen.random_snapshot(rng)
            assert parse_snbg(serialize_snbg(s)) == s

    def test_textual_round_trip_random(self):
        rng = random.Random(202)
        for _ in range(100):
            text = serialize_snbg(gen.random_snapshot(rng))
            assert serialize_snbg(parse_snbg(text)) == text


class TestParseXyz:
    def test_basic(self):
        s = parse_xyz("1\ncomment\nC 0 0 0")
        assert s.atoms == (Atom(1, Vec3(0, 0, 0), "C"),)
        assert s.bonds == ()

    def test_empty(self):
        assert parse_xyz("0\ncomment\n") == Snapshot(0, (), ())

    def test_ids_in_row_order(self):
        s = parse_xyz("3\nwater-ish\nO 0 0 0\nH 0.9 0 0\nH -0.3 0.9 0\n")
        assert [a.id for a in s.atoms] == [1, 2, 3]
        assert [a.element for a in s.atoms] == ["O", "H", "H"]

    def test_count_mismatch(self):
        assert err_code(parse_xyz, "2\ncomment\nC 0 0 0") == "count_mismatch"
        assert err_code(parse_xyz, "1\ncomment\nC 0 0 0\nN 1 1 1") == "count_mismatch"

    def test_case_normalization(self):
        s = parse_xyz("2\nc\nFE 0 0 0\nca 1 1 1")
        assert [a.element for a in s.atoms] == ["Fe", "Ca"]

    def test_syntax(self):
        assert err_code(parse_xyz, "x\ncomment\n") == "syntax_error"
        assert err_code(parse_xyz, "1\ncomment\nC 0 0") == "syntax_error"


class TestInferBonds:
    def test_within_threshold(self):
        atoms = [Atom(1, Vec3(0, 0, 0)), Atom(2, Vec3(1.0, 0, 0))]
        assert infer_bonds(atoms, 1.8) == [Bond(1, 2)]

    def test_beyond_threshold(self):
        atoms = [Atom(1, Vec3(0, 0, 0)), Atom(2, Vec3(2.5, 0, 0))]
        assert infer_bonds(atoms, 1.8) == []

    def test_threshold_is_inclusive(self):
        atoms = [Atom(1, Vec3(0, 0, 0)), Atom(2, Vec3(1.8, 0, 0))]
        assert infer_bonds(atoms, 1.8) == [Bond(1, 2)]

    def test_requires_positive_threshold(self):
        with pytest.raises(ValueError):
            infer_bonds([], 0.0)

    def test_matches_brute_force_on_random_cluster(self):
        rng = random.Random(31)
        atoms = [Atom(i, Vec3(rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10)))
                 for i in range(1, 101)]
        got = infer_bonds(atoms, 1.8)
        assert set(got) == brute_force_pairs(atoms, 1.8)
        assert got == sorted(got)

    def test_order_independent(self):
        rng = random.Random(32)
        atoms = [Atom(i, Vec3(rng.uniform(0, 6), rng.uniform(0, 6), rng.uniform(0, 6)))
                 for i in range(1, 40)]
        shuffled = atoms[:]
        rng.shuffle(shuffled)
        assert infer_bonds(atoms, 1.8) == infer_bonds(shuffled, 1.8)


class TestPoll:
    def write(self, path, text):
        with open(path, "w") as fh:
            fh.write(text)

    def test_initial_load_then_quiet(self, tmp_path):
        p = tmp_path / "m.snbg"
        self.write(p, "ATOMS 1\n1 0 0 0 C\nBONDS 0\n")
        st = WatchState(str(p))
        first = poll(st)
        assert first.kind == "reloaded"
        assert len(first.snapshot.atoms) == 1
        assert poll(st).kind == "none"
        assert poll(st).kind == "none"

    def test_same_bytes_rewrite_is_none(self, tmp_path):
        p = tmp_path / "m.snbg"
        text = "ATOMS 1\n1 0 0 0 C\nBONDS 0\n"
        self.write(p, text)
        st = WatchState(str(p))
        assert poll(st).kind == "reloaded"
        self.write(p, text)  # fresh mtime, same content hash
        os.utime(p, ns=(1, 1))  # force a visible mtime change either way
        assert poll(st).kind == "none"

    def test_content_change_reloads(self, tmp_path):
        p = tmp_path / "m.snbg"
        self.write(p, "ATOMS 1\n1 0 0 0 C\nBONDS 0\n")
        st = WatchState(str(p))
        poll(st)
        self.write(p, "ATOMS 2\n1 0 0 0 C\n2 1 0 0 N\nBONDS 0\n")
        res = poll(st)
        assert res.kind == "reloaded"
        assert len(res.snapshot.atoms) == 2

    def test_missing_file(self, tmp_path):
        st = WatchState(str(tmp_path / "gone.snbg"))
        res = poll(st)
        assert res.kind == "error" and res.reason == "file_missing"

    def test_parse_failure_retries_next_poll(self, tmp_path):
        p = tmp_path / "m.snbg"
        self.write(p, "ATOMS 1\n1 0 0 0 C\nBONDS 0\n")
        st = WatchState(str(p))
        poll(st)
        self.write(p, "ATOMS zzz\n")
        res = poll(st)
        assert res.kind == "error" and res.reason.startswith("parse_failed")
        # fixing the file must reload even though stat may not change again
        self.write(p, "ATOMS 2\n1 0 0 0 C\n2 1 0 0\nBONDS 0\n")
        res = poll(st)
        assert res.kind == "reloaded" and len(res.snapshot.atoms) == 2


class TestRebase:
    def base(self, *ids):
        return Snapshot.build(0, [Atom(i, Vec3(float(i), 0, 0)) for i in ids], ())

    def test_kept_bond(self):
        out, report = rebase(self.base(1, 2), [model.add_bond(1, 2)])
        assert report.kept and not report.dropped
        assert out.bonds == (Bond(1, 2),)

    def test_dropped_missing_atom(self):
        out, report = rebase(self.base(1, 2), [model.set_element(7, "N")])
        assert report.kept == []
        assert report.dropped[0][1] == "missing_atom"
        assert out.atoms == self.base(1, 2).atoms

    def test_dropped_duplicate_bond_state_unchanged(self):
        base = Snapshot.build(0, [Atom(1, Vec3(0, 0, 0)), Atom(2, Vec3(1, 0, 0))], [Bond(1, 2)])
        out, report = rebase(base, [model.add_bond(1, 2)])
        assert [r for _, r in report.dropped] == ["duplicate_bond"]
        assert out.atoms == base.atoms and out.bonds == base.bonds

    def test_empty_overlay_is_identity(self):
        rng = random.Random(9)
        for _ in range(10):
            base = gen.random_snapshot(rng)
            out, report = rebase(base, [])
            assert out == base
            assert report.kept == [] and report.dropped == []

    def test_order_preserved_and_partitioned(self):
        base = self.base(1, 2, 3)
        overlay = [
            model.add_bond(1, 2),
            model.remove_atom(9),      # dropped
            model.set_element(3, "O"),
            model.add_bond(1, 2),      # dropped duplicate
        ]
        out, report = rebase(base, overlay)
        assert report.kept == [overlay[0], overlay[2]]
        assert [op for op, _ in report.dropped] == [overlay[1], overlay[3]]
        assert len(report.kept) + len(report.dropped) == len(overlay)
        assert out.version == base.version + len(report.kept)
