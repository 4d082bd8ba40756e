import pytest

from treecells import GoodTree


@pytest.fixture
def fixture_a() -> GoodTree:
    """Two binary branches: root r=1; r < u=2 < {3,4}; r < w=5 < {6,7}."""
    parent = {0: None, 1: 0, 2: 1, 3: 2, 4: 2, 5: 1, 6: 5, 7: 5}
    return GoodTree(parent, [3, 4, 6, 7])


def refs(tree, *nodes):
    return tuple(tree.ref(n) for n in nodes)
