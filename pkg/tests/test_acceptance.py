"""The nine acceptance criteria at their stated tolerances and time limits.

Each test prints one ``[PASS]``/``[FAIL]`` line; run with ``pytest -v`` to see them
alongside the test names.
"""

import pytest

from crmaps.acceptance import CRITERIA


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    result = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.detail
    assert result.seconds < result.limit, f"took {result.seconds:.1f}s, limit {result.limit}s"
