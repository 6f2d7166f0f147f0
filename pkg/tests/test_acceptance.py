"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with `pytest tests/test_acceptance.py -v -s`.
"""
import json
import random
import signal
import subprocess
import sys
import time

import gen
from oracles import oracle_pick_scene
from snbviz import model
from snbviz.client import connect_and_open
from snbviz.ingest import parse_snbg, parse_xyz, rebase, serialize_snbg
from snbviz.model import Atom, Snapshot, Vec3, apply_op, restore
from snbviz.net import LiveServer
from snbviz.pick import PickConfig, Ray, pick_scene
from snbviz.protocol import StreamDecoder, decode, encode, validate_op
from snbviz.server import ServerConfig
from snbviz.sim import LatencyModel, simulate


def verdict(n: int, name: str):
    """Decorator printing the per-criterion pass/fail line."""
    def wrap(fn):
        import functools

        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"FAIL  criterion {n}: {name}")
                raise
            print(f"PASS  criterion {n}: {name}")
        return run
    return wrap


class TestAcceptance:
    @verdict(1, "convergence suite (clients x ops x 20 seeds, latency 0-500 ms)")
    def test_criterion_1_convergence(self):
        start = time.monotonic()
        max_latencies = [0.0, 5.0, 25.0, 100.0, 250.0, 500.0]
        runs = 0
        for n_clients in (2, 3, 8):
            for n_ops in (100, 1000):
                for seed in range(20):
                    lat = LatencyModel(0.0, max_latencies[seed % len(max_latencies)])
                    report = simulate(n_clients, n_ops, lat, seed=seed)
                    assert report.equal, (
                        f"divergence at clients={n_clients} ops={n_ops} seed={seed}")
                    assert report.replay_matches, (
                        f"replay mismatch at clients={n_clients} ops={n_ops} seed={seed}")
                    runs += 1
        elapsed = time.monotonic() - start
        assert runs == 120
        assert elapsed < 60.0, f"convergence suite took {elapsed:.1f}s (budget 60s)"

    @verdict(2, "pick oracle (1000 rays / 20 scenes) + rigid-motion equivariance")
    def test_criterion_2_pick_oracle(self):
        import numpy as np
        from test_pick import rand_rotation, rot, xform

        rng = random.Random(20240102)
        cfg = PickConfig()
        rays_checked = 0
        for _ in range(20):
            snap = gen.random_scene(rng, max_atoms=50, max_bonds=60)
            for _ in range(50):
                ray = gen.random_ray_at_scene(rng, snap)
                mine = pick_scene(snap, ray, cfg)
                ref = oracle_pick_scene(snap, ray, cfg)
                if mine is None:
                    assert ref is None, f"oracle hit {ref} where pick_scene missed"
                else:
                    assert ref is not None, f"pick_scene hit {mine} where oracle missed"
                    assert mine.entity == ref.entity
                    assert abs(mine.t - ref.t) <= 1e-3
                rays_checked += 1
        assert rays_checked == 1000

        trials = 0
        for _ in range(125):
            snap = gen.random_scene(rng, max_atoms=20, max_bonds=24)
            for _ in range(8):
                ray = gen.random_ray_at_scene(rng, snap)
                base = pick_scene(snap, ray, cfg)
                m = rand_rotation(rng)
                t = np.array([rng.uniform(-10, 10) for _ in range(3)])
                moved = Snapshot(
                    0,
                    tuple(Atom(a.id, xform(m, t, a.pos), a.element) for a in snap.atoms),
                    snap.bonds,
                )
                got = pick_scene(moved, Ray(xform(m, t, ray.origin), rot(m, ray.dir)), cfg)
                if base is None:
                    assert got is None
                else:
                    assert got is not None and got.entity == base.entity
                    assert abs(got.t - base.t) < 1e-9
                trials += 1
        assert trials == 1000

    @verdict(3, "format round-trip x500 + named malformed-input errors")
    def test_criterion_3_format_round_trip(self):
        rng = random.Random(33)
        for _ in range(500):
            snap = gen.random_snapshot(rng)
            assert parse_snbg(serialize_snbg(snap)) == snap  # structural
            text = serialize_snbg(snap)
            assert serialize_snbg(parse_snbg(text)) == text  # textual

        def code_of(fn, text):
            try:
                fn(text)
            except Exception as exc:
                return getattr(exc, "code", None)
            return None

        assert code_of(parse_snbg, "ATOMS 1\n1 0 0 0\nBONDS 1\n1 2") == "unknown_atom_in_bond"
        assert code_of(parse_snbg, "ATOMS 2\n1 0 0 0\n1 1 1 1\nBONDS 0") == "duplicate_atom_id"
        assert code_of(parse_snbg, "ATOMS 2\n1 0 0 0\nBONDS 0") == "count_mismatch"
        assert code_of(parse_snbg, "ATOMS nope\nBONDS 0") == "syntax_error"
        assert code_of(parse_snbg, "garbage line\nATOMS 0\nBONDS 0") == "syntax_error"
        assert code_of(parse_xyz, "2\ncomment\nC 0 0 0") == "count_mismatch"
        assert code_of(parse_xyz, "1\ncomment\nC 0 0") == "syntax_error"

    @verdict(4, "protocol codec: 10^4 round trips + 10^3 byte-at-a-time streams")
    def test_criterion_4_codec(self):
        rng = random.Random(44)
        for _ in range(10_000):
            msg = gen.random_message(rng)
            out, consumed = decode(encode(msg))
            assert out == msg and consumed == len(encode(msg))

        for _ in range(1000):
            msgs = [gen.random_message(rng) for _ in range(rng.randint(1, 4))]
            stream = b"".join(encode(m) for m in msgs)
            dec = StreamDecoder()
            got = []
            for i in range(len(stream)):
                got.extend(dec.feed(stream[i:i + 1]))
            assert got == msgs
            assert dec.pending_bytes == 0

    @verdict(5, "live monitor: reload reaches client within 2x poll interval")
    def test_criterion_5_live_monitor(self, tmp_path):
        poll_ms = 250
        watch = tmp_path / "watch"
        watch.mkdir()
        v1 = "ATOMS 2\n1 0.0000 0.0000 0.0000 C\n2 1.2000 0.0000 0.0000 N\nBONDS 0\n"
        v2 = ("ATOMS 3\n1 0.0000 0.0000 0.0000 C\n2 1.2000 0.0000 0.0000 N\n"
              "3 2.4000 0.0000 0.0000 O\nBONDS 1\n1 2\n")
        path = watch / "run.snbg"
        path.write_text(v1)
        config = ServerConfig(tcp_listen="127.0.0.1:0", ws_listen="127.0.0.1:0",
                              data_dir=str(tmp_path / "data"), watch_dirs=[str(watch)],
                              poll_interval_ms=poll_ms, checkpoint_interval_s=9999)
        server = LiveServer(config)
        server.start()
        try:
            client, cd = connect_and_open(f"127.0.0.1:{server.tcp_port}", "run")
            overlay_op = model.add_bond(1, 2)
            result = client.submit_and_await("run", overlay_op)
            assert result[0] == "applied"

            # Offline oracle: rebase the overlay onto the new file content.
            _, oracle_report = rebase(parse_snbg(v2), [overlay_op])
            expected_drops = len(oracle_report.dropped)
            assert expected_drops == 1  # the bond already exists in v2

            t0 = time.monotonic()
            path.write_text(v2)
            assert client.wait_until(lambda: cd.reload_count >= 1,
                                     timeout=2.0 * poll_ms / 1000.0 + 0.5)
            elapsed = time.monotonic() - t0
            assert elapsed <= 2.0 * poll_ms / 1000.0, f"reload took {elapsed * 1000:.0f} ms"
            assert cd.last_dropped == expected_drops
            assert len(cd.local.atoms) == 3
            client.close()
        finally:
            server.stop()

    @verdict(6, "crash recovery: checkpoint, SIGKILL, recover, replay op log")
    def test_criterion_6_crash_recovery(self, tmp_path):
        data_dir = tmp_path / "data"
        proc = subprocess.Popen(
            [sys.executable, "-m", "snbviz.cli", "serve",
             "--tcp", "127.0.0.1:0", "--ws", "127.0.0.1:0",
             "--data", str(data_dir), "--checkpoint-s", "0.3", "--create", "m"],
            stderr=subprocess.PIPE, text=True)
        try:
            port = None
            for _ in range(200):
                line = proc.stderr.readline()
                if line.startswith("tcp "):
                    port = int(line.split()[1])
                    break
            assert port, "server did not report its port"

            client, cd = connect_and_open(f"127.0.0.1:{port}", "m")
            client.submit_and_await("m", model.add_atom(1, Vec3(0, 0, 0), "C"))
            client.submit_and_await("m", model.add_atom(2, Vec3(1.5, 0, 0), "N"))
            client.submit_and_await("m", model.add_bond(1, 2))
            checkpoint_snapshot = cd.snapshot()  # state at v3

            meta = data_dir / "m.meta.json"
            deadline = time.monotonic() + 5
            while time.monotonic() < deadline:
                if meta.exists() and json.loads(meta.read_text())["version"] == 3:
                    break
                time.sleep(0.05)
            assert json.loads(meta.read_text())["version"] == 3, "checkpoint never landed"

            # two more edits that reach only the op log
            client.submit_and_await("m", model.set_element(2, "O"))
            client.submit_and_await("m", model.move_atom(1, Vec3(0, 0.5, 0)))
            final_snapshot = cd.snapshot()  # state at v5
            client.close()
        finally:
            proc.send_signal(signal.SIGKILL)
            proc.wait()

        # checkpointed .snbg bytes match the v3 state the client observed
        assert (data_dir / "m.snbg").read_text() == serialize_snbg(checkpoint_snapshot)
        assert json.loads((data_dir / "m.meta.json").read_text())["version"] == 3

        from snbviz.server import ServerCore
        from snbviz.storage import DocStore
        core = ServerCore(ServerConfig(data_dir=str(data_dir)), DocStore(str(data_dir)))
        core.load()
        doc = core.docs["m"].doc
        assert doc.version == 5, "op log replay did not reach the last applied version"
        recovered = model.snapshot(doc)
        assert recovered == final_snapshot
        assert serialize_snbg(recovered) == serialize_snbg(final_snapshot)

    @verdict(7, "validate_op <=> apply_op equivalence over 10^4 random pairs")
    def test_criterion_7_validate_equivalence(self):
        rng = random.Random(777)
        disagreements = 0
        reasons = set()
        for _ in range(10_000):
            snap = gen.random_snapshot(rng, max_atoms=10, max_bonds=12)
            pool = tuple(a.id for a in snap.atoms)
            op = gen.random_op_any(rng, id_pool=pool)
            verdict_ = validate_op(op, snap)
            outcome = apply_op(restore(snap, "x"), op)
            if verdict_ != outcome:
                disagreements += 1
            reasons.add(verdict_)
        assert disagreements == 0
        assert reasons >= {None, "missing_atom", "self_bond", "duplicate_bond",
                           "missing_bond", "duplicate_atom", "bad_element",
                           "nonfinite_position"}
