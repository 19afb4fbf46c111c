"""Smoke test for the speedbal extension module.

Build and install first:
    pip install --no-build-isolation -e crates/python
"""

import json
from pathlib import Path

import speedbal

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def main():
    inst = speedbal.Instance(
        [speedbal.Job("a", 6, 0, 1), speedbal.Job("b", 1, 0, 1)], machines=2, alpha=2
    )
    sol = speedbal.solve(inst)
    assert sol.speeds == {"a": 6.0, "b": 1.0}, sol.speeds
    assert close(sol.energy, 37.0)
    assert [step["critical_jobs"] for step in sol.trace] == [["a"], ["b"]]
    assert len(sol.schedule.segments) == 2

    verdict = speedbal.verify(inst, sol.schedule)
    assert verdict["passed"], verdict

    from_file = speedbal.Instance.from_json((FIXTURES / "idle_fast_job.json").read_text())
    bad = speedbal.Schedule.from_json((FIXTURES / "bad_schedule.json").read_text())
    verdict = speedbal.verify(from_file, bad)
    assert not verdict["passed"]
    witness = verdict["kkt"]["properties"][1]["witness"]
    assert (witness["job"], witness["other"]) == ("a", "b"), witness

    assert speedbal.bal_speeds(from_file) == speedbal.solve(from_file).speeds
    energy, speeds = speedbal.yds_energy(from_file)
    assert close(energy, speedbal.solve(from_file).energy), energy
    energy, _ = speedbal.brute_force_energy(inst)
    assert close(energy, 37.0, 1e-6), energy

    makespan, schedule = speedbal.mbal([("1", 2.0, 0.0)], machines=1, alpha=2.0, budget=4.0)
    assert close(makespan, 1.0, 1e-8), makespan
    assert schedule.energy <= 4.0 * (1 + 1e-9)
    assert json.loads(schedule.to_json())["segments"][0]["job"] == "1"

    try:
        speedbal.Instance([speedbal.Job("x", 0, 0, 1)], machines=1, alpha=2)
    except speedbal.SpeedbalError as e:
        assert "NonPositiveWork" in str(e)
    else:
        raise AssertionError("zero work accepted")

    print("speedbal smoke test passed")


if __name__ == "__main__":
    main()
