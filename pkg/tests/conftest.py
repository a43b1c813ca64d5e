import pytest

from thermoemu import CONFIG_DIR, build_four_level, build_heat_leak_variant, build_three_level, reference_baths, load_machine

SHIPPED = sorted(CONFIG_DIR.glob("*.cfg"))

# filled by the acceptance tests, echoed at the end of the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])


def ref_three(dim=1):
    return build_three_level(0.3, 1.0, 1e-8, reference_baths(dim))


def ref_four(epsilon, dim=1):
    return build_four_level(0.3, 1.0, epsilon, 1e-8, reference_baths(dim))


def ref_leak(leak_gamma=1e-11):
    return build_heat_leak_variant(ref_three(), leak_gamma)


def ref_specs():
    """Every machine the cross-route checks run on."""
    specs = {"three": ref_three(), "leak": ref_leak()}
    for eps in (-0.3, -0.1, 0.1, 0.3):
        for dim in (1, 3):
            specs[f"four_d{dim}_{eps:+}"] = ref_four(eps, dim)
    for path in SHIPPED:
        specs[path.stem] = load_machine(path)
    return specs


@pytest.fixture
def three():
    return ref_three()


@pytest.fixture
def leak():
    return ref_leak()
