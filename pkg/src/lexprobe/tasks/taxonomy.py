"""Rooted-DAG hypernym taxonomy and Wu-Palmer similarity."""

from __future__ import annotations

from ..errors import FormatError


class Taxonomy:
    """Nodes with child-to-parent edges forming a single-rooted acyclic graph.

    Depth is the shortest hypernym-path length from the root, with the root
    itself at depth 1; a node with several parents takes the smallest depth
    any of them offers.
    """

    def __init__(self, edges: list[tuple[str, str]]):
        self._parents: dict[str, set[str]] = {}
        nodes: set[str] = set()
        for child, parent in edges:
            if child == parent:
                raise FormatError(f"self-edge on {child!r}")
            nodes.add(child)
            nodes.add(parent)
            self._parents.setdefault(child, set()).add(parent)
        roots = sorted(n for n in nodes if n not in self._parents)
        if len(roots) != 1:
            raise FormatError(f"taxonomy must have exactly one root, found {roots}")
        self.root = roots[0]
        self.nodes = nodes
        self._check_acyclic()
        self._depth = self._compute_depths()
        if len(self._depth) != len(nodes):
            unreachable = sorted(nodes - set(self._depth))
            raise FormatError(f"unreachable nodes: {unreachable[:5]}")

    def _check_acyclic(self) -> None:
        # Kahn's algorithm over child->parent edges; leftovers mean a cycle.
        out_degree = {n: len(self._parents.get(n, ())) for n in self.nodes}
        children: dict[str, list[str]] = {}
        for child, parents in self._parents.items():
            for parent in parents:
                children.setdefault(parent, []).append(child)
        ready = [n for n, deg in out_degree.items() if deg == 0]
        processed = 0
        while ready:
            node = ready.pop()
            processed += 1
            for child in children.get(node, ()):
                out_degree[child] -= 1
                if out_degree[child] == 0:
                    ready.append(child)
        if processed != len(self.nodes):
            cyclic = sorted(n for n, deg in out_degree.items() if deg > 0)
            raise FormatError(f"cycle in taxonomy involving: {cyclic[:5]}")

    def _compute_depths(self) -> dict[str, int]:
        children: dict[str, list[str]] = {}
        for child, parents in self._parents.items():
            for parent in parents:
                children.setdefault(parent, []).append(child)
        depth = {self.root: 1}
        frontier = [self.root]
        while frontier:
            nxt = []
            for node in frontier:
                for child in children.get(node, ()):
                    if child not in depth:
                        depth[child] = depth[node] + 1
                        nxt.append(child)
            frontier = nxt
        return depth

    def __contains__(self, node: str) -> bool:
        return node in self.nodes

    def depth(self, node: str) -> int:
        if node not in self.nodes:
            raise KeyError(f"node {node!r} not in taxonomy")
        return self._depth[node]

    def ancestors(self, node: str) -> set[str]:
        """The node itself plus every transitive parent."""
        if node not in self.nodes:
            raise KeyError(f"node {node!r} not in taxonomy")
        seen = {node}
        frontier = [node]
        while frontier:
            nxt = []
            for cur in frontier:
                for parent in self._parents.get(cur, ()):
                    if parent not in seen:
                        seen.add(parent)
                        nxt.append(parent)
            frontier = nxt
        return seen


def wu_palmer(taxonomy: Taxonomy, a: str, b: str) -> float:
    """2 * depth(lcs) / (depth(a) + depth(b)), lcs = deepest common ancestor."""
    common = taxonomy.ancestors(a) & taxonomy.ancestors(b)
    lcs_depth = max(taxonomy.depth(node) for node in common)
    return 2.0 * lcs_depth / (taxonomy.depth(a) + taxonomy.depth(b))


def load_taxonomy(path: str) -> Taxonomy:
    """Read child<TAB>parent lines into a Taxonomy."""
    edges = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2 or not fields[0] or not fields[1]:
                raise FormatError(f"{path}:{lineno}: expected 'child<TAB>parent', got {line!r}")
            edges.append((fields[0], fields[1]))
    if not edges:
        raise FormatError(f"{path}: empty taxonomy")
    return Taxonomy(edges)
