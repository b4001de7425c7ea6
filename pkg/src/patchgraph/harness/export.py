"""Write a graph corpus out as DOT files, JSON files or a single JSON-lines file."""
from __future__ import annotations

from pathlib import Path

from ..graphbuild import ImageGraph, export_graph, read_jsonl, write_jsonl


def export_command(source, fmt: str, out: str | Path, jsonl: bool = False) -> list[Path]:
    graphs: list[ImageGraph] = read_jsonl(source) if isinstance(source, (str, Path)) else list(source)
    out = Path(out)
    if jsonl:
        out.parent.mkdir(parents=True, exist_ok=True)
        write_jsonl(out, graphs)
        return [out]
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i, g in enumerate(graphs):
        p = out / f"graph_{i:05d}.{fmt}"
        try:
            p.write_text(export_graph(g, fmt))
        except OSError as e:
            raise OSError(f"{p}: {e}") from e
        written.append(p)
    return written
