from pathlib import Path

import pytest

from spsys.parser import parse
from spsys.validator import validate

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def source(structure: str = "", requirements: str = "", name: str = "m") -> str:
    return f'model "{name}" {{\n  requirements {{\n{requirements}\n  }}\n  structure {{\n{structure}\n  }}\n}}\n'


def build(structure: str = "", requirements: str = ""):
    """Parse a snippet that must be free of parse diagnostics."""
    result = parse(source(structure, requirements), "t.spsys")
    assert result.diagnostics == [], [d.render() for d in result.diagnostics]
    return result.model


def codes(model) -> list[str]:
    return [d.code for d in validate(model).diagnostics]


@pytest.fixture(scope="session")
def early():
    return parse((FIXTURES / "incare_early.spsys").read_text(), "incare_early.spsys").model


@pytest.fixture(scope="session")
def final():
    return parse((FIXTURES / "incare_final.spsys").read_text(), "incare_final.spsys").model


@pytest.fixture(scope="session")
def requirements_only():
    return parse((FIXTURES / "incare_requirements.spsys").read_text(), "incare_requirements.spsys").model


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.summary_lines():
        terminalreporter.write_line(line)
