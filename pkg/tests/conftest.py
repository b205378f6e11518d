import pytest

from fingerspell_al.nn import ArchSpec


@pytest.fixture
def tiny_arch():
    return ArchSpec(input_resolution=8, conv_blocks=((4, 3, 0.25),), fc_layers=((16, 0.5),), class_count=4)


# acceptance tests append (criterion, passed, detail) here
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
