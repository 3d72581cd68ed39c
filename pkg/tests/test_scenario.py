import pytest

from fhsim.cli import bundled_scenario_names, load_scenario_text, main
from fhsim.scenario import (
    ScenarioError,
    build_scenario,
    parse_scenario,
    render_scenario,
    run_scenario,
)

MINIMAL = """
[topology]
node = r1 rrh
node = hub switch
node = b1 bbu
link = r1 hub cap=1e9 delay=1e-6
link = hub b1 cap=1e9 delay=1e-6

[cells]
cell = r1 scheme=modulation_bits
ues = r1 count=4 mean_on=20 mean_off=20 demand=10 mcs_step=0.2
control = r1 pdcch=100 prach_period=10 prach_res=50

[sync]
source = b1 quality=0

[sessions]
session = dl pattern=p2p src=r1 dst=b1 class=2 mean=5e7 peak=2e8 bound=5e-3 traffic=trace

[engine]
scheduler = strict_priority
horizon = 0.02
subframes = 20
seed = 3
"""


class TestParse:
    def test_minimal_parses(self):
        scenario = parse_scenario(MINIMAL)
        assert len(scenario.nodes) == 3
        assert len(scenario.links) == 2
        assert scenario.sessions[0].name == "dl"
        assert scenario.engine.subframes == 20

    def test_all_bundled_scenarios_parse(self):
        names = bundled_scenario_names()
        assert len(names) == 5
        for name in names:
            text, _ = load_scenario_text(name)
            scenario = parse_scenario(text, name=name)
            assert scenario.sessions

    def test_undeclared_node_reference_diagnosed_with_line(self):
        bad = MINIMAL.replace("session = dl pattern=p2p src=r1", "session = dl pattern=p2p src=r9")
        with pytest.raises(ScenarioError) as exc:
            parse_scenario(bad)
        assert "r9" in str(exc.value)
        assert exc.value.line > 0

    def test_unknown_key_diagnosed(self):
        bad = MINIMAL.replace("cap=1e9", "capacity=1e9")
        with pytest.raises(ScenarioError) as exc:
            parse_scenario(bad)
        assert "capacity" in str(exc.value)

    def test_type_mismatch_diagnosed(self):
        bad = MINIMAL.replace("class=2", "class=fast")
        with pytest.raises(ScenarioError):
            parse_scenario(bad)

    def test_cell_on_non_rrh_rejected(self):
        bad = MINIMAL.replace("cell = r1", "cell = b1").replace("ues = r1", "ues = b1").replace(
            "control = r1", "control = b1"
        )
        with pytest.raises(ScenarioError, match="rrh"):
            parse_scenario(bad)

    def test_trace_session_needs_cell(self):
        bad = MINIMAL.replace("cell = r1", "# cell = r1").replace("ues = r1", "# u").replace(
            "control = r1", "# c"
        )
        with pytest.raises(ScenarioError, match="cell"):
            parse_scenario(bad)

    def test_timing_source_node_supported(self, tmp_path):
        text = MINIMAL.replace(
            "[cells]",
            "node = gps timing\nlink = gps hub cap=1e6 delay=1e-6\n\n[cells]",
        ).replace("source = b1 quality=0", "source = hub quality=0")
        scenario = parse_scenario(text)
        assert ("gps", "timing") in [(n.name, n.kind) for n in scenario.nodes]
        assert run_scenario(scenario, str(tmp_path)) == 0
        sync = (tmp_path / "sync.csv").read_text().splitlines()
        assert len(sync) == 1 + 4  # hub, both hosts, and the timing node

    def test_parse_render_parse_identity_minimal(self):
        first = parse_scenario(MINIMAL)
        again = parse_scenario(render_scenario(first))
        assert again == first

    def test_parse_render_parse_identity_bundled(self):
        for name in bundled_scenario_names():
            text, _ = load_scenario_text(name)
            first = parse_scenario(text, name=name)
            again = parse_scenario(render_scenario(first), name=name)
            assert again == first, name


class TestBuild:
    def test_world_has_circuit_per_unicast_session(self):
        built = build_scenario(parse_scenario(MINIMAL))
        assert len(built.world.circuits) == 1
        assert built.world.circuits[0].session_id == "dl"
        assert not built.infeasible

    def test_scheduler_override(self):
        built = build_scenario(parse_scenario(MINIMAL), scheduler="fifo")
        assert built.scenario.engine.scheduler == "fifo"

    def test_seed_override_changes_traces(self):
        a = build_scenario(parse_scenario(MINIMAL), seed=1)
        b = build_scenario(parse_scenario(MINIMAL), seed=2)
        assert a.traces["r1"].volumes != b.traces["r1"].volumes


class TestRunScenario:
    def test_writes_all_tables(self, tmp_path):
        rc = run_scenario(parse_scenario(MINIMAL), str(tmp_path))
        assert rc == 0
        for name in (
            "sessions.csv",
            "links.csv",
            "global.csv",
            "control_log.csv",
            "sync.csv",
            "trace_r1.csv",
        ):
            assert (tmp_path / name).exists(), name

    def test_mandatory_infeasible_returns_one(self, tmp_path):
        bad = MINIMAL.replace("peak=2e8", "peak=2e12")
        rc = run_scenario(parse_scenario(bad), str(tmp_path))
        assert rc == 1

    def test_optional_infeasible_returns_zero(self, tmp_path):
        bad = MINIMAL.replace("bound=5e-3 traffic=trace", "bound=5e-3 traffic=trace optional=true").replace(
            "peak=2e8", "peak=2e12"
        )
        rc = run_scenario(parse_scenario(bad), str(tmp_path))
        assert rc == 0
        log = (tmp_path / "control_log.csv").read_text()
        assert "infeasible(no-bandwidth)" in log

    def test_byte_identical_reruns(self, tmp_path):
        scenario = parse_scenario(MINIMAL)
        run_scenario(scenario, str(tmp_path / "a"))
        run_scenario(scenario, str(tmp_path / "b"))
        for child in sorted((tmp_path / "a").iterdir()):
            assert child.read_bytes() == (tmp_path / "b" / child.name).read_bytes()

    def test_sweep_mode(self, tmp_path):
        rc = run_scenario(parse_scenario(MINIMAL), str(tmp_path), sweep=[64, 512])
        assert rc == 0
        sweep = (tmp_path / "sweep.csv").read_text().splitlines()
        assert len(sweep) == 3


class TestCli:
    def test_list(self, capsys):
        assert main(["--list"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert "latency-tiers" in out

    def test_parse_error_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.scn"
        bad.write_text("[topology]\nnode = r1 spaceship\n")
        assert main([str(bad), "--out", str(tmp_path / "out")]) == 2
        assert "line 2" in capsys.readouterr().err

    def test_missing_scenario_exit_2(self, tmp_path, capsys):
        assert main(["no-such-scenario", "--out", str(tmp_path)]) == 2

    def test_run_bundled_by_name(self, tmp_path):
        assert main(["cran-aggregation", "--out", str(tmp_path / "out")]) == 0
        assert (tmp_path / "out" / "sessions.csv").exists()

    def test_subframes_and_seed_flags(self, tmp_path):
        rc = main(
            [
                "cran-aggregation",
                "--out",
                str(tmp_path / "out"),
                "--seed",
                "99",
                "--subframes",
                "10",
            ]
        )
        assert rc == 0
        trace = (tmp_path / "out" / "trace_rrh1.csv").read_text().splitlines()
        assert len(trace) == 11
