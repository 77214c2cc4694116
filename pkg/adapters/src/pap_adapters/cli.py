"""CLI: pap-adapters serve --kind vlm --engine hf:<model-id> --port 8101"""
from __future__ import annotations

import click

from .server import AdapterConfig, serve


@click.group()
def main():
    """pap-wire/1 model adapter servers."""


@main.command("serve")
@click.option("--kind", type=click.Choice(["vlm", "ovd", "sam"]), required=True)
@click.option("--engine", "engine_spec", default="static",
              help="'static' or 'hf:<model-id>'")
@click.option("--device", default="cpu")
@click.option("--port", type=int, default=8008)
@click.option("--host", default="127.0.0.1")
@click.option("--max-concurrency", type=int, default=1)
def serve_cmd(kind, engine_spec, device, port, host, max_concurrency):
    """Serve one model endpoint until interrupted."""
    cfg = AdapterConfig(kind=kind, engine_spec=engine_spec, device=device,
                        port=port, host=host, max_concurrency=max_concurrency)
    click.echo(f"serving {kind} ({engine_spec}) on {host}:{port}")
    serve(cfg)


if __name__ == "__main__":
    main()
