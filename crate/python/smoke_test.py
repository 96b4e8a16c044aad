"""Smoke test for the `duet` extension module.

Build and install it first:

    pip install --no-build-isolation ./crates/py
"""

import duet

NO_SERVICE = "[service_issue]airplane_mode_on|unseat_sim_card"


def main():
    suite = duet.sample_suite(42)
    assert len(suite) == 114, len(suite)

    tasks = {t["ID"]: t for t in duet.compose_tasks()}
    task = tasks[NO_SERVICE]
    assert duet.verify_task(task)["verdict"] == "pass"

    env = duet.TelecomEnv(task)
    assert env.task_id == NO_SERVICE
    assert not env.solved()
    for name in ("toggle_airplane_mode", "reseat_sim_card"):
        env.step("user", {"kind": "tool_call", "name": name})
    assert env.solved()
    assert all(r["passed"] for r in env.assertions())

    runs = duet.run_oracle(task, mode="no_user", trials=2, seed=1)
    assert [r["record"]["reward"] for r in runs] == [1, 1]

    assert abs(duet.pass_hat_k([(2, 4)], 2) - 1 / 6) < 1e-12
    try:
        duet.run_oracle(task, mode="solo")
    except ValueError:
        pass
    else:
        raise AssertionError("bad mode accepted")

    print(f"duet {duet.__version__}: ok ({len(tasks)} tasks)")


if __name__ == "__main__":
    main()
