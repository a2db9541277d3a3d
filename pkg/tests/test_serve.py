"""The CLI against a real socket-bound service instance."""

import socket
import threading
import time

import pytest
import uvicorn

from vista.cli import main
from vista.service.app import create_app


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture(scope="module")
def server_url():
    port = _free_port()
    config = uvicorn.Config(create_app(), host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    for _ in range(200):
        if server.started:
            break
        time.sleep(0.025)
    else:
        pytest.fail("service did not start")
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def test_cli_run_and_inspect_against_remote_server(tmp_path, server_url, capsys):
    prompt = tmp_path / "p.txt"
    prompt.write_text("a kite surfing over waves\n")
    out_dir = tmp_path / "remote-run"
    code = main(
        [
            "--server", server_url,
            "run",
            "--prompt-file", str(prompt),
            "--backend", "mock",
            "--seed", "3",
            "--iterations", "1",
            "--out-dir", str(out_dir),
            "--config", str(_small_config(tmp_path)),
        ]
    )
    assert code == 0
    assert "completed" in capsys.readouterr().out
    assert (out_dir / "manifest.json").exists()

    code = main(["--server", server_url, "inspect", str(out_dir), "--iteration", "0"])
    assert code == 0
    assert "iteration 0 (init)" in capsys.readouterr().out


def _small_config(tmp_path):
    import json

    path = tmp_path / "small.json"
    path.write_text(
        json.dumps(
            {
                "run": {"max_workers": 1},
                "planner": {"num_planned_prompts": 1, "num_variants": 1},
                "optimizer": {"num_sampled_prompts": 1, "num_variants": 1},
            }
        )
    )
    return path
