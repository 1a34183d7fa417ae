"""Disjoint-set forest with path compression and union by size."""

from typing import List


class UnionFind:
    """
    Union-find over the elements 0 .. n-1.

    Used for single-configuration cluster counting and for contracting the
    unbroken bonds of a contour pattern. ``components`` is kept up to date
    by ``union`` so cluster counts are O(1) after the edges have been
    processed.
    """

    def __init__(self, n: int):
        self.parent: List[int] = list(range(n))
        self.size: List[int] = [1] * n
        self.components = n

    def find(self, element: int) -> int:
        root = element
        while self.parent[root] != root:
            root = self.parent[root]
        # compress
        while self.parent[element] != root:
            self.parent[element], element = root, self.parent[element]
        return root

    def union(self, first: int, second: int) -> bool:
        """Merge the sets of two elements; False if they were already joined"""
        rep_first = self.find(first)
        rep_second = self.find(second)
        if rep_first == rep_second:
            return False

        if self.size[rep_first] < self.size[rep_second]:
            rep_first, rep_second = rep_second, rep_first
        self.parent[rep_second] = rep_first
        self.size[rep_first] += self.size[rep_second]
        self.components -= 1
        return True
