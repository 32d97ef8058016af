import pytest

from semkg.kg import KnowledgeGraph, Node, Triple
from semkg.synthetic import SyntheticSpec, synthetic_edge_map, synthetic_kg


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL/SKIP line for the acceptance summary."""
    def record(number, passed, detail):
        status = "PASS" if passed is True else "FAIL" if passed is False else "SKIP"
        line = f"[{status}] criterion {number}: {detail}"
        request.config._acceptance_lines.append(line)
        print(line)
    return record


def N(name, t="thing"):
    return Node(name, t)


@pytest.fixture
def chain_kg():
    # a -r- b -r- c -r- d plus spare nodes of each type
    a, b, c, d = N("a", "x"), N("b", "y"), N("c", "x"), N("d", "y")
    e, f = N("e", "x"), N("f", "y")
    return KnowledgeGraph([
        Triple(a, "likes", b), Triple(b, "likes", c), Triple(c, "hates", d),
        Triple(e, "likes", f),
    ], "chain")


@pytest.fixture(scope="session")
def big_kg():
    return synthetic_kg(SyntheticSpec(n_nodes=500, seed=7))


@pytest.fixture(scope="session")
def toy_kg():
    return synthetic_kg(SyntheticSpec(n_nodes=50, seed=1))


@pytest.fixture(scope="session")
def emap():
    return synthetic_edge_map()


@pytest.fixture(scope="session")
def toy_files(tmp_path_factory, toy_kg):
    """The toy KG and a matching edge map written to disk, as the pipeline expects."""
    from semkg.kg import write_triples
    d = tmp_path_factory.mktemp("toy_inputs")
    write_triples(toy_kg.triples, d / "kg.jsonl")
    (d / "edge_map.json").write_text(synthetic_edge_map().to_json())
    return d
