"""The acceptance gate: every criterion runs at its pinned tolerance and
prints one pass/fail line; the suite is green only if all twelve hold."""

import pytest

from bergmod import acceptance

CONFIG = {"seed": 1234, "level": 6}


@pytest.fixture(scope="module")
def shared_config(tmp_path_factory):
    cfg = dict(CONFIG)
    cfg["cache_dir"] = str(tmp_path_factory.mktemp("acceptcache"))
    return cfg


@pytest.mark.parametrize("name", list(acceptance.CRITERIA))
def test_criterion(name, shared_config, capsys):
    result = acceptance.CRITERIA[name](shared_config)
    with capsys.disabled():
        print(f"\n[{'PASS' if result.passed else 'FAIL'}] acceptance: {name}")
        for chk in result.checks:
            mark = "ok  " if chk.passed else "FAIL"
            print(f"    {mark} {chk.name}: {chk.value:.3e} {chk.op} {chk.tol:.1e}")
    failing = [c.name for c in result.checks if not c.passed]
    assert not failing, f"{name}: failing checks {failing}"
