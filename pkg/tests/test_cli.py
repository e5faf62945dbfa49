import json
import socket
import threading
import time
from pathlib import Path

import httpx
import pytest

from mservice.cli import build_server, main
from mservice.config import Config, load_config
from mservice.errors import ConfigInvalid, FixtureInvalid, PortInUse
from mservice.fixtures import apply_fixture, load_fixture
from mservice.service import ServiceContext

from conftest import FakeClock

FIXTURE = Path(__file__).resolve().parents[1] / "fixtures" / "demo.json"
SCRIPT = Path(__file__).resolve().parents[1] / "fixtures" / "figure9.script.json"


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class TestConfig:
    def test_defaults(self):
        config = load_config(None, environ={})
        assert config.ussd.service_code == "31022"
        assert config.ads.unit_price_tsh == 10
        assert config.sms.registration_shortcode == "15050"

    def test_toml_file(self, tmp_path):
        path = tmp_path / "service.toml"
        path.write_text("[ads]\nunit_price_tsh = 25\n[ussd]\npage_size = 4\n")
        config = load_config(path, environ={})
        assert config.ads.unit_price_tsh == 25
        assert config.ussd.page_size == 4

    def test_json_file(self, tmp_path):
        path = tmp_path / "service.json"
        path.write_text(json.dumps({"sms": {"unit_cost_tsh": 40}}))
        assert load_config(path, environ={}).sms.unit_cost_tsh == 40

    def test_env_overrides(self, tmp_path):
        config = load_config(None, environ={"MSERVICE_ADS_UNIT_PRICE_TSH": "7"})
        assert config.ads.unit_price_tsh == 7

    def test_unknown_key_named(self, tmp_path):
        path = tmp_path / "service.toml"
        path.write_text("[ads]\nunit_price = 25\n")
        with pytest.raises(ConfigInvalid, match="ads.unit_price"):
            load_config(path, environ={})

    def test_bad_policy_rejected(self, tmp_path):
        path = tmp_path / "service.toml"
        path.write_text('[ads]\nfallback_policy = "shrug"\n')
        with pytest.raises(ConfigInvalid, match="fallback_policy"):
            load_config(path, environ={})


class TestSeed:
    def test_counts_match_fixture(self, tmp_path, capsys):
        config = tmp_path / "svc.toml"
        config.write_text(f'[storage]\npath = "{tmp_path}/m.db"\n')
        assert main(["seed", str(FIXTURE), "--config", str(config)]) == 0
        out = capsys.readouterr().out
        assert "categories: 8 created" in out
        assert "sponsors: 2 created" in out
        assert "content: 6 created" in out

    def test_seed_is_idempotent(self, tmp_path, capsys):
        config = tmp_path / "svc.toml"
        db = tmp_path / "m.db"
        config.write_text(f'[storage]\npath = "{db}"\n')
        main(["seed", str(FIXTURE), "--config", str(config)])
        capsys.readouterr()
        assert main(["seed", str(FIXTURE), "--config", str(config)]) == 0
        out = capsys.readouterr().out
        assert "categories: 0 created" in out
        assert "sponsors: 0 created" in out

        cfg = Config()
        cfg.storage.path = str(db)
        context = ServiceContext(cfg, clock=FakeClock())
        try:
            assert len(context.store.list_categories()) == 8
            assert len(context.store.list_sponsors()) == 2
        finally:
            context.close()

    def test_cyclic_categories_rejected(self, tmp_path):
        fixture = tmp_path / "bad.json"
        fixture.write_text(json.dumps({"categories": [
            {"name": "A", "parent": "B"}, {"name": "B", "parent": "A"}]}))
        cfg = Config()
        cfg.storage.path = ":memory:"
        context = ServiceContext(cfg, clock=FakeClock())
        try:
            with pytest.raises(FixtureInvalid, match="cycle"):
                apply_fixture(context, load_fixture(fixture))
        finally:
            context.close()

    def test_fixture_error_names_the_row(self, tmp_path):
        fixture = tmp_path / "bad.json"
        fixture.write_text(json.dumps({"sponsors": [{"contact": "x"}]}))
        cfg = Config()
        cfg.storage.path = ":memory:"
        context = ServiceContext(cfg, clock=FakeClock())
        try:
            with pytest.raises(FixtureInvalid, match=r"sponsors\[0\]"):
                apply_fixture(context, load_fixture(fixture))
        finally:
            context.close()

    def test_missing_storage_dir_is_config_error(self, tmp_path, capsys):
        config = tmp_path / "svc.toml"
        config.write_text(f'[storage]\npath = "{tmp_path}/nope/m.db"\n')
        assert main(["seed", str(FIXTURE), "--config", str(config)]) == 2
        assert "storage.path" in capsys.readouterr().err


class TestSimulate:
    def test_figure9_script_passes(self, capsys):
        exit_code = main(["simulate", str(SCRIPT), "--seed", "42",
                          "--fixture", str(FIXTURE)])
        out = capsys.readouterr().out
        assert exit_code == 0
        assert "PASS 7/7 steps" in out
        assert "Tuma msimbo" in out

    def test_transcripts_are_deterministic(self, capsys):
        main(["simulate", str(SCRIPT), "--seed", "42", "--fixture", str(FIXTURE)])
        first = capsys.readouterr().out
        main(["simulate", str(SCRIPT), "--seed", "42", "--fixture", str(FIXTURE)])
        second = capsys.readouterr().out
        assert first == second

    def test_different_seed_changes_code(self, capsys):
        main(["simulate", str(SCRIPT), "--seed", "1", "--fixture", str(FIXTURE)])
        first = capsys.readouterr().out
        main(["simulate", str(SCRIPT), "--seed", "2", "--fixture", str(FIXTURE)])
        second = capsys.readouterr().out
        assert first != second

    def test_failed_expectation_exits_nonzero(self, tmp_path, capsys):
        script = tmp_path / "bad.script.json"
        script.write_text(json.dumps({"steps": [
            {"actor": "255712000009", "action": "dial", "payload": "*31022#",
             "expect": "hamna kitu kama hiki"}]}))
        exit_code = main(["simulate", str(script), "--seed", "1",
                          "--fixture", str(FIXTURE)])
        out = capsys.readouterr().out
        assert exit_code == 1
        assert "FAIL step 1" in out


class TestReport:
    def test_report_writes_csv_and_figures(self, tmp_path, capsys):
        config = tmp_path / "svc.toml"
        db = tmp_path / "m.db"
        config.write_text(f'[storage]\npath = "{db}"\n')
        main(["seed", str(FIXTURE), "--config", str(config)])
        # drive one sponsored flow so the report has data
        cfg = load_config(config, environ={})
        context = ServiceContext(cfg, rng_seed=4, clock=FakeClock())
        try:
            context.registry.register("255712000055")
            leaf = next(c for c in context.store.list_categories()
                        if c.name_sw == "Lishe ya mjamzito")
            context.ledger.reserve_request("255712000055", leaf.id)
        finally:
            context.close()
        capsys.readouterr()
        out_dir = tmp_path / "reports"
        assert main(["report", "--config", str(config),
                     "--out-dir", str(out_dir)]) == 0
        out = capsys.readouterr().out
        assert (out_dir / "deliveries.csv").exists()
        assert (out_dir / "impressions.csv").exists()
        assert (out_dir / "sms_cost_by_kind.png").stat().st_size > 0
        assert (out_dir / "sponsor_spend.png").stat().st_size > 0
        assert "total_cost" in out
        lines = (out_dir / "deliveries.csv").read_text().strip().splitlines()
        assert lines[0].startswith("id,at,msisdn,kind,segments,cost")
        assert len(lines) == 2  # header plus the one ad SMS


class TestServe:
    def test_port_in_use_detected(self, tmp_path):
        port = free_port()
        blocker = socket.socket()
        blocker.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        blocker.bind(("127.0.0.1", port))
        blocker.listen(1)
        config = Config()
        config.storage.path = str(tmp_path / "m.db")
        config.server.port = port
        try:
            with pytest.raises(PortInUse):
                build_server(config)
        finally:
            blocker.close()

    def test_serve_cli_reports_port_clash(self, tmp_path, capsys):
        port = free_port()
        blocker = socket.socket()
        blocker.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        blocker.bind(("127.0.0.1", port))
        blocker.listen(1)
        config = tmp_path / "svc.toml"
        config.write_text(f'[storage]\npath = "{tmp_path}/m.db"\n'
                          f"[server]\nport = {port}\n")
        try:
            assert main(["serve", "--config", str(config)]) == 2
            assert "PortInUse" in capsys.readouterr().err
        finally:
            blocker.close()

    def test_health_endpoint_over_real_socket(self, tmp_path):
        config = Config()
        config.storage.path = str(tmp_path / "m.db")
        config.server.port = free_port()
        ctx, server = build_server(config)
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        try:
            deadline = time.time() + 10
            url = f"http://127.0.0.1:{config.server.port}/health"
            while time.time() < deadline:
                try:
                    response = httpx.get(url, timeout=1.0)
                    assert response.json() == {"status": "ok"}
                    break
                except httpx.HTTPError:
                    time.sleep(0.05)
            else:
                pytest.fail("server did not come up")
        finally:
            server.should_exit = True
            thread.join(timeout=10)
            ctx.close()


class TestSimulateRemote:
    def test_simulate_against_live_server(self, tmp_path, capsys):
        import uvicorn

        from mservice.fixtures import apply_fixture, load_fixture
        from mservice.httpapi import create_app

        config = Config()
        config.storage.path = ":memory:"
        config.server.port = free_port()
        context = ServiceContext(config, rng_seed=11)
        apply_fixture(context, load_fixture(FIXTURE))
        server = uvicorn.Server(uvicorn.Config(create_app(context),
                                               host="127.0.0.1",
                                               port=config.server.port,
                                               log_level="error"))
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        base = f"http://127.0.0.1:{config.server.port}"
        try:
            deadline = time.time() + 10
            while time.time() < deadline:
                try:
                    httpx.get(base + "/health", timeout=0.5)
                    break
                except httpx.HTTPError:
                    time.sleep(0.05)
            exit_code = main(["simulate", str(SCRIPT), "--url", base])
            out = capsys.readouterr().out
            assert exit_code == 0, out
            assert "PASS 7/7 steps" in out
        finally:
            server.should_exit = True
            thread.join(timeout=10)
            context.close()
