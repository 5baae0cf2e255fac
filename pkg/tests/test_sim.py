import math
from dataclasses import replace

import numpy as np
import pytest

from pipefollow import fis, sim
from pipefollow.sim import (AuvState, CameraModel, EnvelopeExitError,
                            MissionFailure, PathRecord, Scenario,
                            ScenarioError, World, drift_metrics,
                            heading_vector, image_center, mission_objective,
                            parse_scenario, pct_of_drift, pipeline_x_at,
                            project_point, render_view, run_mission, step_auv,
                            tune)

TABLE_WORLD = World(pipeline=((36.5, 0.0), (47.5, 22.5), (58.5, 45.0),
                              (69.6, 67.5), (80.8, 90.0), (91.9, 112.5)), seed=7)
ALIGNED_START = AuvState(36.5, 0.0, 116.0)
SMALL_CAMERA = CameraModel(image_width=96, image_height=72)


def small_scenario(**kwargs):
    defaults = dict(world=TABLE_WORLD, camera=SMALL_CAMERA,
                    start=ALIGNED_START, min_area=10)
    defaults.update(kwargs)
    return Scenario(**defaults)


class TestWorldValidation:
    def test_needs_two_waypoints(self):
        with pytest.raises(ValueError):
            World(pipeline=((10.0, 0.0),))

    def test_waypoints_inside_envelope(self):
        with pytest.raises(ValueError):
            World(pipeline=((10.0, 0.0), (200.0, 50.0)))

    def test_y_strictly_increasing(self):
        with pytest.raises(ValueError):
            World(pipeline=((10.0, 50.0), (20.0, 50.0)))

    def test_negative_seed_rejected(self):
        with pytest.raises(ValueError):
            World(pipeline=((10.0, 0.0), (10.0, 50.0)), seed=-1)

    def test_camera_bounds(self):
        with pytest.raises(ValueError):
            CameraModel(tilt_deg=0.0)
        with pytest.raises(ValueError):
            CameraModel(fov_deg=200.0)

    def test_scenario_bounds(self):
        world = World(pipeline=((10.0, 0.0), (10.0, 50.0)))
        with pytest.raises(ValueError):
            Scenario(world=world, step_length=0.0)
        with pytest.raises(ValueError):
            Scenario(world=world, steps_per_image=0)
        with pytest.raises(ValueError):
            Scenario(world=world, start=AuvState(-5.0, 0.0, 90.0))


class TestStepAuv:
    def test_straight_step(self):
        sc = small_scenario()
        out = step_auv(AuvState(40.0, 10.0, 90.0), 90.0, sc)
        assert out == AuvState(40.0, 32.5, 90.0)

    def test_steering_maps_to_heading_change(self):
        sc = small_scenario(steering_gain=0.5)
        out = step_auv(AuvState(75.0, 10.0, 90.0), 120.0, sc)
        assert out.heading == pytest.approx(105.0)
        assert out.x > 75.0

    def test_symmetric_commands_mirror_heading(self):
        sc = small_scenario()
        state = AuvState(75.0, 10.0, 95.0)
        left = step_auv(state, 60.0, sc)
        right = step_auv(state, 120.0, sc)
        assert left.heading + right.heading == pytest.approx(2 * state.heading)

    def test_steer_range_validated(self):
        sc = small_scenario()
        with pytest.raises(ValueError):
            step_auv(ALIGNED_START, -1.0, sc)
        with pytest.raises(ValueError):
            step_auv(ALIGNED_START, 180.5, sc)

    def test_envelope_exit_raises(self):
        sc = small_scenario()
        with pytest.raises(EnvelopeExitError):
            step_auv(AuvState(2.0, 10.0, 0.0), 90.0, sc)  # heading 0 points at -x

    def test_heading_vector_convention(self):
        dx, dy = heading_vector(90.0)
        assert (dx, dy) == pytest.approx((0.0, 1.0))
        dx, dy = heading_vector(135.0)
        assert dx > 0 and dy > 0  # right of +y leans toward +x


class TestProjection:
    def test_optical_axis_hits_image_center(self):
        cam = CameraModel()
        auv = AuvState(75.0, 20.0, 90.0)
        ahead = cam.height_cm / math.tan(math.radians(cam.tilt_deg))
        uv = project_point((75.0, 20.0 + ahead), auv, cam)
        assert uv == pytest.approx(image_center(cam), abs=1e-9)

    def test_point_behind_camera_is_none(self):
        cam = CameraModel()
        assert project_point((75.0, 0.0), AuvState(75.0, 100.0, 90.0), cam) is None

    def test_rendered_pipe_is_brighter_where_projected(self):
        cam = CameraModel(noise_amplitude=0, speckle_density=0.0)
        world = World(pipeline=((75.0, 0.0), (75.0, 200.0)), seed=0)
        auv = AuvState(75.0, 20.0, 90.0)
        img = render_view(world, auv, cam)
        ahead = cam.height_cm / math.tan(math.radians(cam.tilt_deg))
        u, v = project_point((75.0, 20.0 + ahead), auv, cam)
        assert img.pixels[int(round(v)), int(round(u))] == cam.pipe_intensity


class TestRenderView:
    def test_pipe_behind_camera_gives_background_only(self):
        cam = CameraModel(noise_amplitude=0, speckle_density=0.0)
        world = World(pipeline=((75.0, 0.0), (75.0, 30.0)), seed=0)
        img = render_view(world, AuvState(75.0, 120.0, 90.0), cam)
        assert np.all(img.pixels == cam.seabed_intensity)

    def test_noise_free_render_is_two_valued(self):
        cam = CameraModel(noise_amplitude=0, speckle_density=0.0)
        img = render_view(World(pipeline=((75.0, 0.0), (75.0, 200.0)), seed=0),
                          AuvState(75.0, 10.0, 90.0), cam)
        assert set(np.unique(img.pixels)) == {cam.seabed_intensity, cam.pipe_intensity}

    def test_same_seed_and_frame_bit_identical(self):
        world = World(pipeline=((75.0, 0.0), (75.0, 200.0)), seed=11)
        a = render_view(world, AuvState(75.0, 10.0, 90.0), CameraModel(), frame=2)
        b = render_view(world, AuvState(75.0, 10.0, 90.0), CameraModel(), frame=2)
        assert np.array_equal(a.pixels, b.pixels)

    def test_frame_index_changes_noise(self):
        world = World(pipeline=((75.0, 0.0), (75.0, 200.0)), seed=11)
        a = render_view(world, AuvState(75.0, 10.0, 90.0), CameraModel(), frame=0)
        b = render_view(world, AuvState(75.0, 10.0, 90.0), CameraModel(), frame=1)
        assert not np.array_equal(a.pixels, b.pixels)

    def test_noise_stays_within_amplitude(self):
        cam = CameraModel(noise_amplitude=30, speckle_density=0.0)
        world = World(pipeline=((10.0, 0.0), (10.0, 100.0)), seed=4)
        img = render_view(world, AuvState(140.0, 0.0, 90.0), cam)  # seabed only
        assert img.pixels.min() >= cam.seabed_intensity - 30
        assert img.pixels.max() <= cam.seabed_intensity + 30


class TestDriftMetrics:
    def test_reference_table_rows(self):
        world = World(pipeline=((47.5, 22.5), (58.5, 45.0), (69.6, 67.5),
                                (80.8, 90.0), (91.9, 112.5)))
        before = [69.5, 71.7, 73.3, 78.3, 75.7]
        after = [55.2, 57.4, 68.5, 88.1, 85.9]
        ys = [22.5, 45.0, 67.5, 90.0, 112.5]
        rec = drift_metrics([AuvState(x, y, 90.0) for x, y in zip(before, ys)], world)
        assert [p.drift for p in rec.points] == [22.0, 13.2, 3.7, -2.5, -16.2]
        assert [p.pct_drift for p in rec.points] == [275.0, 165.0, 46.3, 31.3, 202.5]
        rec = drift_metrics([AuvState(x, y, 90.0) for x, y in zip(after, ys)], world)
        assert [p.drift for p in rec.points] == [7.7, -1.1, -1.1, 7.3, -6.0]
        assert [p.pct_drift for p in rec.points] == [96.3, 13.8, 13.8, 91.3, 75.0]

    def test_zero_drift(self):
        assert pct_of_drift(0.0, 8.0) == 0.0

    def test_half_up_rounding(self):
        assert pct_of_drift(3.7, 8.0) == 46.3   # 46.25 rounds up
        assert pct_of_drift(2.5, 8.0) == 31.3   # 31.25 rounds up

    def test_interpolates_between_waypoints(self):
        world = World(pipeline=((40.0, 0.0), (60.0, 100.0)))
        assert pipeline_x_at(world, 50.0) == pytest.approx(50.0)
        assert pipeline_x_at(world, 0.0) == 40.0
        assert pipeline_x_at(world, 100.0) == 60.0

    def test_out_of_span_rejected(self):
        world = World(pipeline=((40.0, 10.0), (60.0, 100.0)))
        with pytest.raises(ValueError):
            pipeline_x_at(world, 5.0)
        with pytest.raises(ValueError):
            drift_metrics([AuvState(50.0, 150.0, 90.0)], world)

    def test_tolerance_must_be_positive(self):
        with pytest.raises(ValueError):
            pct_of_drift(1.0, 0.0)


class TestPathRecordCsv:
    def test_exact_format(self):
        world = World(pipeline=((47.5, 22.5), (58.5, 45.0)))
        rec = drift_metrics([AuvState(69.5, 22.5, 90.0)], world)
        assert rec.to_csv() == ("step,actual_x_cm,sim_x_cm,drift_cm,pct_drift\n"
                                "1,47.5,69.5,+22.0,275.0\n")

    def test_negative_drift_sign(self):
        world = World(pipeline=((47.5, 22.5), (58.5, 45.0)))
        rec = drift_metrics([AuvState(45.0, 22.5, 90.0)], world)
        assert ",-2.5," in rec.to_csv()

    def test_round_trip(self):
        world = World(pipeline=((47.5, 22.5), (58.5, 45.0), (69.6, 67.5)))
        rec = drift_metrics([AuvState(50.0, 30.0, 90.0), AuvState(60.0, 50.0, 91.0)], world)
        back = PathRecord.from_csv(rec.to_csv())
        assert [p.drift for p in back.points] == [p.drift for p in rec.points]
        assert [p.step for p in back.points] == [1, 2]

    def test_rejects_missing_header(self):
        with pytest.raises(ValueError):
            PathRecord.from_csv("1,2,3,4,5\n")

    def test_rejects_empty_body(self):
        with pytest.raises(ValueError):
            PathRecord.from_csv("step,actual_x_cm,sim_x_cm,drift_cm,pct_drift\n")

    def test_rejects_malformed_rows(self):
        with pytest.raises(ValueError):
            PathRecord.from_csv("step,actual_x_cm,sim_x_cm,drift_cm,pct_drift\n1,2,3\n")
        with pytest.raises(ValueError):
            PathRecord.from_csv("step,actual_x_cm,sim_x_cm,drift_cm,pct_drift\n1,a,3,4,5\n")


class TestRunMission:
    def test_default_scenario_tracks_within_tolerance(self, default_scenario):
        record = run_mission(default_scenario, sim.load_rulebase(default_scenario))
        assert len(record.points) == 5
        assert record.within_tolerance()

    def test_straight_centered_pipe_barely_drifts(self):
        world = World(pipeline=tuple((75.0, 22.5 * k) for k in range(6)), seed=7)
        sc = Scenario(world=world, start=AuvState(75.0, 0.0, 90.0))
        record = run_mission(sc, fis.default_rulebase())
        assert record.max_abs_drift() < 1.0

    def test_straight_pipe_stays_inside_envelope(self):
        world = World(pipeline=tuple((75.0, 22.5 * k) for k in range(6)), seed=3)
        sc = Scenario(world=world, start=AuvState(75.0, 0.0, 90.0))
        run_mission(sc, fis.default_rulebase())  # would raise on envelope exit

    def test_overlapped_equals_sequential(self, default_scenario):
        rb = sim.load_rulebase(default_scenario)
        a = run_mission(default_scenario, rb, mode="sequential")
        b = run_mission(default_scenario, rb, mode="overlapped")
        assert a.to_csv() == b.to_csv()

    def test_unknown_mode_rejected(self, default_scenario):
        with pytest.raises(ValueError):
            run_mission(default_scenario, fis.default_rulebase(), mode="parallel")

    def test_mirror_world_negates_drift(self):
        rb = fis.default_rulebase()
        ex = TABLE_WORLD.envelope[0]
        mirrored = World(envelope=TABLE_WORLD.envelope,
                         pipeline=tuple((ex - x, y) for x, y in TABLE_WORLD.pipeline),
                         pipe_width=TABLE_WORLD.pipe_width, seed=TABLE_WORLD.seed)
        a = run_mission(Scenario(world=TABLE_WORLD, start=ALIGNED_START), rb)
        b = run_mission(Scenario(world=mirrored,
                                 start=AuvState(ex - ALIGNED_START.x, 0.0,
                                                180.0 - ALIGNED_START.heading)), rb)
        for p, q in zip(a.points, b.points):
            assert p.drift + q.drift == pytest.approx(0.0, abs=1.0)

    def test_detuned_exceeds_tolerance(self, detuned_scenario):
        record = run_mission(detuned_scenario, sim.load_rulebase(detuned_scenario))
        assert any(abs(p.drift) > record.tolerance for p in record.points)

    def test_no_object_failure(self):
        world = World(pipeline=((10.0, 0.0), (10.0, 100.0)), seed=1)
        sc = Scenario(world=world, start=AuvState(140.0, 0.0, 90.0))
        with pytest.raises(MissionFailure) as exc:
            run_mission(sc, fis.default_rulebase())
        assert exc.value.reason == "no-object"

    def test_envelope_exit_failure(self):
        world = World(pipeline=((130.0, 0.0), (130.0, 200.0)), seed=1)
        sc = Scenario(world=world, start=AuvState(140.0, 0.0, 120.0), steering_gain=0.0)
        with pytest.raises(MissionFailure) as exc:
            run_mission(sc, fis.default_rulebase())
        assert exc.value.reason == "envelope-exit"
        assert exc.value.step == 1

    def test_seed_changes_noise_but_not_success(self):
        rb = fis.default_rulebase()
        views = []
        for seed in (0, 1, 2):
            world = replace(TABLE_WORLD, seed=seed)
            views.append(render_view(world, ALIGNED_START, SMALL_CAMERA).pixels.tobytes())
            record = run_mission(small_scenario(world=world), rb)
            assert record.within_tolerance()  # denoising absorbs the speckle
        assert len(set(views)) == 3


class TestTune:
    def _detuned(self, shift):
        rb = fis.default_rulebase()
        params = dict(fis.term_parameters(rb))
        for var in fis.INPUT_VARIABLES:
            for term in rb.variables[var].terms:
                w, c = params[(var, term)]
                params[(var, term)] = (w, min(c + shift, 1.0))
        return params

    def test_budget_one_returns_init(self):
        init = fis.term_parameters(fis.default_rulebase())
        result = tune([small_scenario()], init, budget=1)
        assert result.params == init
        assert result.best_objective == result.initial_objective
        assert result.evaluations == 1

    def test_detuned_init_strictly_improves(self):
        init = self._detuned(0.1)
        result = tune([small_scenario()], init, budget=120)
        assert result.initial_objective[0] > 8.0
        assert result.best_objective < result.initial_objective

    def test_never_worse_than_init(self):
        init = self._detuned(0.2)
        result = tune([small_scenario()], init, budget=40)
        assert result.best_objective <= result.initial_objective

    def test_deterministic(self):
        init = self._detuned(0.1)
        a = tune([small_scenario()], init, budget=60)
        b = tune([small_scenario()], init, budget=60)
        assert a.params == b.params
        assert a.best_objective == b.best_objective

    def test_objective_counts_failures_as_infinite(self):
        world = World(pipeline=((10.0, 0.0), (10.0, 100.0)), seed=1)
        sc = Scenario(world=world, start=AuvState(140.0, 0.0, 90.0))
        assert mission_objective([sc], fis.default_rulebase()) == (math.inf, math.inf)

    def test_invalid_budget(self):
        with pytest.raises(ValueError):
            tune([small_scenario()], fis.term_parameters(fis.default_rulebase()), budget=0)


class TestScenarioFiles:
    def test_load_default(self, default_scenario):
        assert default_scenario.world.envelope == (150.0, 200.0)
        assert default_scenario.step_length == 22.5
        assert default_scenario.steps_per_image == 5
        assert default_scenario.start == AuvState(36.5, 0.0, 116.0)
        assert default_scenario.thresholds.t1 == 180
        assert default_scenario.rulebase_file.endswith("tuned.rules")

    def test_unknown_key_names_line(self):
        with pytest.raises(ScenarioError, match=r"line 2.*bogus"):
            parse_scenario("pipe.waypoints = 10:0; 10:50\nbogus.key = 1\n")

    def test_missing_waypoints_rejected(self):
        with pytest.raises(ScenarioError, match="pipe.waypoints"):
            parse_scenario("seed = 3\n")

    def test_malformed_waypoint_rejected(self):
        with pytest.raises(ScenarioError, match="waypoint"):
            parse_scenario("pipe.waypoints = 10:0; oops\n")

    def test_non_numeric_value_rejected(self):
        with pytest.raises(ScenarioError, match="seed"):
            parse_scenario("pipe.waypoints = 10:0; 10:50\nseed = many\n")

    def test_missing_equals_rejected(self):
        with pytest.raises(ScenarioError, match="line 1"):
            parse_scenario("just some text\n")

    def test_start_defaults_to_first_waypoint(self):
        sc = parse_scenario("pipe.waypoints = 30:10; 40:60\n")
        assert sc.start == AuvState(30.0, 10.0, 90.0)

    def test_invariant_violations_become_scenario_errors(self):
        with pytest.raises(ScenarioError):
            parse_scenario("pipe.waypoints = 10:0; 10:300\n")  # outside envelope

    def test_rulebase_resolved_relative_to_file(self, tmp_path):
        rules = tmp_path / "my.rules"
        rules.write_text("IF x5 IS Left THEN y1 IS TurnLeft\n")
        scen = tmp_path / "my.scenario"
        scen.write_text("pipe.waypoints = 10:0; 10:50\nrulebase = my.rules\n")
        sc = sim.load_scenario(scen)
        assert len(sim.load_rulebase(sc).rules) == 1

    def test_empty_rulebase_falls_back_to_default(self):
        sc = parse_scenario("pipe.waypoints = 10:0; 10:50\n")
        assert sim.load_rulebase(sc) == fis.default_rulebase()
