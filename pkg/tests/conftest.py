import pytest

from sectsum import Document, FeatureConfig, SynthConfig, generate_synthetic, init_params

# Lines appended by the acceptance tests; replayed after the run so they
# stay visible even though pytest captures per-test stdout.
acceptance_lines = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.line(line)


def make_doc(doc_id="doc0", texts=("alpha beta", "gamma delta", "alpha beta gamma"),
             section_starts=(0, 2), reference="alpha beta gamma delta"):
    """Small handcrafted document used across the suite."""
    return Document.build(doc_id, list(texts), section_starts=section_starts,
                          reference_summary=reference)


@pytest.fixture(scope="session")
def tiny_corpus():
    """Eight labeled synthetic documents, shared read-only across tests."""
    config = SynthConfig(n_documents=8, sections_per_document=(2, 3),
                         sentences_per_section=(3, 4), rng_seed=11)
    return generate_synthetic(config)


@pytest.fixture(scope="session")
def small_model():
    """A small feature config and freshly initialized parameters."""
    config = FeatureConfig(dim=8, hash_buckets=16)
    params = init_params(config, n_layers=1, n_heads=2, rng_seed=5)
    return config, params
