"""Graphviz rendering of net flow fields.

Arcs whose net flow prints as nonzero at three decimals are drawn with
labels; the remaining graph structure is kept as light edges, and nodes
touched by no drawn arc are grayed out (the source may circulate gross
flow through a node whose every net flow still prints as zero).
"""

from __future__ import annotations

import numpy as np

from .graph import Graph
from .rsp_tsallis import FlowField

# smallest net flow whose 3-decimal label is not "0.000"
PRINT_EPS = 5e-4


def render_net_flows(g: Graph, flow: FlowField, path=None) -> str:
    """Render a flow field as DOT text; write it to ``path`` when given."""
    net = flow.net_flows.tocoo()
    drawn = {}
    for i, j, f in zip(net.row, net.col, net.data):
        if f >= PRINT_EPS:
            drawn[(int(i), int(j))] = float(f)
    active = {flow.source}
    for i, j in drawn:
        active.add(i)
        active.add(j)
    lines = ["digraph flows {", "  rankdir=LR;",
             '  node [shape=circle, fontsize=11];']
    for idx, name in enumerate(g.node_names):
        if idx in active:
            lines.append(f'  "{name}";')
        else:
            lines.append(f'  "{name}" [color=gray70, fontcolor=gray70];')
    for (i, j), f in sorted(drawn.items()):
        lines.append(f'  "{g.node_names[i]}" -> "{g.node_names[j]}" '
                     f'[label="{f:.3f}", penwidth=1.6];')
    seen_pairs = set()
    for i in range(g.n):
        for e in range(g.indptr[i], g.indptr[i + 1]):
            j = int(g.indices[e])
            if (i, j) in drawn or (j, i) in drawn:
                continue
            pair = (min(i, j), max(i, j))
            if pair in seen_pairs:
                continue
            seen_pairs.add(pair)
            two_way = g.reverse_edge[e] >= 0
            style = "dir=none, " if two_way else ""
            lines.append(f'  "{g.node_names[i]}" -> "{g.node_names[j]}" '
                         f'[{style}color=gray85];')
    lines.append("}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
