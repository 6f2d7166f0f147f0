"""snbviz command line: serve, edit (scripted), import, sim, pick-fixture."""
from __future__ import annotations

import logging
import sys

import click

from .client import import_file, run_script
from .goldens import write_pick_fixture
from .net import LiveServer
from .server import ServerConfig
from .sim import LatencyModel, report_json, simulate


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def main(verbose: bool):
    """Collaborative molecular structure server and tools."""
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


@main.command()
@click.option("--tcp", "tcp_listen", default="127.0.0.1:5150", show_default=True,
              help="TCP listen address (framed protocol).")
@click.option("--ws", "ws_listen", default="127.0.0.1:5151", show_default=True,
              help="WebSocket listen address (same payloads).")
@click.option("--data", "data_dir", default="snbviz-data", envvar="SNBVIZ_DATA",
              show_default=True, help="Checkpoint/op-log directory.")
@click.option("--watch", "watch_dirs", multiple=True, type=click.Path(),
              help="Directory of structure output files to monitor (repeatable).")
@click.option("--poll-ms", default=500, show_default=True, help="Watch poll interval.")
@click.option("--bond-threshold", default=1.8, show_default=True,
              help="Bond inference distance for imported XYZ data, in Å.")
@click.option("--checkpoint-s", default=30.0, show_default=True,
              help="Checkpoint interval in seconds.")
@click.option("--create", "create_docs", multiple=True,
              help="Create an empty named document at startup (repeatable).")
def serve(tcp_listen, ws_listen, data_dir, watch_dirs, poll_ms, bond_threshold,
          checkpoint_s, create_docs):
    """Run the collaboration server."""
    config = ServerConfig(
        tcp_listen=tcp_listen,
        ws_listen=ws_listen,
        data_dir=data_dir,
        watch_dirs=list(watch_dirs),
        poll_interval_ms=poll_ms,
        bond_threshold=bond_threshold,
        checkpoint_interval_s=checkpoint_s,
    )
    server = LiveServer(config, create_docs=tuple(create_docs))
    if not server.core.docs:
        server.core.create_doc("scratch")
        logging.getLogger("snbviz").info("no documents found; created 'scratch'")
    server.start()
    click.echo(f"tcp {server.tcp_port} ws {server.ws_port}", err=True)
    server.run_forever()


@main.command()
@click.option("--connect", "address", required=True, help="Server address host:port.")
@click.option("--script", "script_path", required=True, type=click.Path(exists=True),
              help="Edit script, one command per line.")
def edit(address, script_path):
    """Run a scripted editing session against a server."""
    report = run_script(script_path, address)
    if report.ok:
        click.echo(f"ok: {report.applied} applied, {report.rejected} rejected, "
                   f"{report.atoms} atoms, {report.bonds} bonds")
    else:
        click.echo(f"failed at line {report.line}: {report.message}", err=True)
        sys.exit(1)


@main.command(name="import")
@click.argument("path", type=click.Path(exists=True))
@click.option("--connect", "address", required=True, help="Server address host:port.")
@click.option("--doc", required=True, help="Target document name.")
@click.option("--bond-threshold", default=1.8, show_default=True,
              help="Bond inference distance for XYZ files, in Å.")
def import_cmd(path, address, doc, bond_threshold):
    """Upload a .snbg or .xyz file into a document as a sequence of edits."""
    report = import_file(path, address, doc, bond_threshold)
    click.echo(f"imported: {report.applied} ops applied, {report.rejected} rejected, "
               f"document now has {report.atoms} atoms, {report.bonds} bonds")
    if report.rejected:
        sys.exit(1)


@main.command()
@click.option("--clients", default=3, show_default=True)
@click.option("--ops", default=100, show_default=True, help="Total ops across all clients.")
@click.option("--seed", default=0, show_default=True)
@click.option("--min-lat", default=0.0, show_default=True, help="Minimum link latency, ms.")
@click.option("--max-lat", default=50.0, show_default=True, help="Maximum link latency, ms.")
def sim(clients, ops, seed, min_lat, max_lat):
    """Deterministic multi-client convergence simulation; prints the report
    as JSON and exits nonzero when clients diverge."""
    report = simulate(clients, ops, LatencyModel(min_lat, max_lat), seed)
    click.echo(report_json(report))
    if not (report.equal and report.replay_matches):
        sys.exit(1)


@main.command(name="pick-fixture")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed", default=7, show_default=True)
@click.option("--scenes", default=10, show_default=True)
@click.option("--rays", default=30, show_default=True, help="Rays per scene.")
def pick_fixture(out_path, seed, scenes, rays):
    """Export golden pick vectors for cross-implementation checks."""
    fixture = write_pick_fixture(out_path, seed, scenes, rays)
    click.echo(f"wrote {len(fixture['rows'])} rows over {len(fixture['scenes'])} scenes "
               f"to {out_path}")


if __name__ == "__main__":
    main()
