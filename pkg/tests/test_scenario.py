"""Tests for scenario parsing and the deterministic observation model."""

import copy
import json
import math

import numpy as np
import pytest

from lanemap.errors import ConfigError
from lanemap.graph import dumps_graph
from lanemap.scenario import (
    dumps_frame,
    frame_from_dict,
    frame_to_dict,
    iter_frames,
    load_scenario,
    observe_frame,
    scenario_from_dict,
    vehicle_pose,
)

ANCHOR = {"latitude": 37.0, "longitude": -122.0}

WORLD = {
    "lanes": [
        {"id": "L0", "control_points": [[0.0, 0.0], [10.0, 0.0], [20.0, 0.0], [30.0, 0.0]]},
        {"id": "L1", "control_points": [[30.0, 0.0], [40.0, 0.0], [50.0, 5.0], [60.0, 10.0]]},
    ],
    "edges": [["L0", "L1"]],
}


def base_doc():
    return {
        "version": 1,
        "seed": 7,
        "anchor": dict(ANCHOR),
        "bezier_degree": 3,
        "world": copy.deepcopy(WORLD),
        "vehicles": [
            {
                "vehicle_id": "v1",
                "visibility_radius": None,
                "noise_sigma": 0.0,
                "channel": {},
                "trajectory": [
                    {"x": 0.0, "y": 0.0, "heading": 0.0},
                    {"x": 15.0, "y": 0.0, "heading": 0.0},
                ],
            }
        ],
        "merge": {},
    }


class TestScenarioParsing:
    def test_valid_document(self):
        sc = scenario_from_dict(base_doc())
        assert sc.seed == 7
        assert sc.anchor == (37.0, -122.0)
        assert sc.degree == 3
        assert sc.lane_ids == ("L0", "L1")
        assert len(sc.world.vertices) == 2
        assert sc.world.edges == {(0, 0, 1)}
        assert len(sc.vehicles) == 1
        assert sc.merge.match_distance == 1.0

    def test_defaults(self):
        doc = base_doc()
        del doc["merge"]
        del doc["bezier_degree"]
        doc["world"]["lanes"] = [
            {"id": "L0", "control_points": [[0.0, 0.0], [10.0, 0.0], [20.0, 0.0], [30.0, 0.0]]}
        ]
        doc["world"]["edges"] = []
        sc = scenario_from_dict(doc)
        assert sc.degree == 3
        assert sc.merge.resample_spacing == 0.25

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d.update(extra=1),
            lambda d: d.pop("version"),
            lambda d: d.update(version=2),
            lambda d: d.update(seed=True),
            lambda d: d.update(seed="7"),
            lambda d: d["anchor"].update(altitude=5.0),
            lambda d: d["anchor"].pop("latitude"),
            lambda d: d["world"].update(name="x"),
            lambda d: d["world"].update(lanes=[]),
            lambda d: d["world"]["lanes"][0].update(color="red"),
            lambda d: d["world"]["lanes"][0].update(id=""),
            lambda d: d["world"]["lanes"][1].update(id="L0"),
            lambda d: d["world"]["lanes"][0].update(control_points=[[0, 0], [1, 1]]),
            lambda d: d["world"]["lanes"][0].update(control_points=[[0, 0, 0]] * 4),
            lambda d: d["world"].update(edges=[["L0", "L0"]]),
            lambda d: d["world"].update(edges=[["L0", "ghost"]]),
            lambda d: d.update(vehicles=[]),
            lambda d: d["vehicles"][0].update(speed=5),
            lambda d: d["vehicles"][0].update(vehicle_id=""),
            lambda d: d["vehicles"][0].update(visibility_radius=0.0),
            lambda d: d["vehicles"][0].update(noise_sigma=-0.1),
            lambda d: d["vehicles"][0]["channel"].update(burst=2),
            lambda d: d["vehicles"][0]["channel"].update(drop_probability=1.5),
            lambda d: d["vehicles"][0].update(trajectory=[]),
            lambda d: d["vehicles"][0]["trajectory"][0].update(z=1.0),
            lambda d: d["merge"].update(match_distance=-1.0),
            lambda d: d["merge"].update(gate=2.0),
        ],
    )
    def test_rejected_documents(self, mutate):
        doc = base_doc()
        mutate(doc)
        with pytest.raises(ConfigError):
            scenario_from_dict(doc)

    def test_duplicate_vehicle_id(self):
        doc = base_doc()
        doc["vehicles"].append(copy.deepcopy(doc["vehicles"][0]))
        with pytest.raises(ConfigError):
            scenario_from_dict(doc)

    def test_not_an_object(self):
        with pytest.raises(ConfigError):
            scenario_from_dict([1, 2])

    def test_load_scenario_file(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(base_doc()))
        sc = load_scenario(path)
        assert sc.lane_ids == ("L0", "L1")

    def test_load_scenario_bad_json(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError):
            load_scenario(path)


class TestObservation:
    def test_zero_noise_is_exact_translation(self):
        sc = scenario_from_dict(base_doc())
        record = observe_frame(sc, 0, 1)
        # Pose (15, 0) heading 0: BEV is a pure translation, bit exact.
        for world_curve, seen in zip(sc.world.vertices, record.graph.vertices):
            expected = world_curve.control_points - np.array([15.0, 0.0])
            assert np.array_equal(seen.control_points, expected)
        assert record.graph.edges == {(0, 0, 1)}

    def test_heading_rotates_into_vehicle_frame(self):
        doc = base_doc()
        doc["vehicles"][0]["trajectory"] = [{"x": 0.0, "y": 0.0, "heading": math.pi / 2}]
        sc = scenario_from_dict(doc)
        record = observe_frame(sc, 0, 0)
        # Facing east: forward (BEV y) is world +x, right (BEV x) is world -y.
        world_cps = sc.world.vertices[0].control_points
        seen = record.graph.vertices[0].control_points
        assert np.allclose(seen[:, 0], -world_cps[:, 1], atol=1e-12)
        assert np.allclose(seen[:, 1], world_cps[:, 0], atol=1e-12)

    def test_visibility_requires_every_control_point(self):
        doc = base_doc()
        # From (0, 0): L0 reaches 30 m, L1 reaches hypot(60, 10) = 60.8 m.
        doc["vehicles"][0]["trajectory"] = [{"x": 0.0, "y": 0.0, "heading": 0.0}]
        for radius, expect in [(30.0, 1), (29.9, 0), (61.0, 2), (None, 2)]:
            doc["vehicles"][0]["visibility_radius"] = radius
            record = observe_frame(scenario_from_dict(doc), 0, 0)
            assert len(record.graph.vertices) == expect

    def test_edges_only_between_kept_lanes(self):
        doc = base_doc()
        doc["vehicles"][0]["trajectory"] = [{"x": 0.0, "y": 0.0, "heading": 0.0}]
        doc["vehicles"][0]["visibility_radius"] = 30.0
        record = observe_frame(scenario_from_dict(doc), 0, 0)
        assert len(record.graph.vertices) == 1
        assert record.graph.edges == set()

    def test_noise_is_deterministic_per_stream(self):
        doc = base_doc()
        doc["vehicles"][0]["noise_sigma"] = 0.1
        sc = scenario_from_dict(doc)
        again = scenario_from_dict(doc)
        a = dumps_frame(observe_frame(sc, 0, 0))
        b = dumps_frame(observe_frame(again, 0, 0))
        assert a == b
        # Different frames of the same vehicle see different noise.
        assert dumps_frame(observe_frame(sc, 0, 1)) != a

    def test_noise_scale(self):
        doc = base_doc()
        doc["vehicles"][0]["noise_sigma"] = 0.1
        doc["vehicles"][0]["trajectory"] = [
            {"x": 0.0, "y": 0.0, "heading": 0.0} for _ in range(60)
        ]
        sc = scenario_from_dict(doc)
        offsets = []
        for fi in range(60):
            record = observe_frame(sc, 0, fi)
            for world_curve, seen in zip(sc.world.vertices, record.graph.vertices):
                offsets.append(seen.control_points - world_curve.control_points)
        noise = np.concatenate(offsets).ravel()
        assert abs(noise.mean()) < 0.02
        assert abs(noise.std() - 0.1) < 0.015

    def test_frame_meta(self):
        sc = scenario_from_dict(base_doc())
        record = observe_frame(sc, 0, 1)
        assert record.meta.vehicle_id == "v1"
        assert record.meta.frame_id == 1
        assert record.meta.timestamp_ms == 100
        expected = vehicle_pose(sc, 15.0, 0.0, 0.0)
        assert record.meta.pose == expected

    def test_vehicle_pose_at_anchor(self):
        sc = scenario_from_dict(base_doc())
        pose = vehicle_pose(sc, 0.0, 0.0, 0.25)
        assert pose.latitude == pytest.approx(37.0, abs=1e-12)
        assert pose.longitude == pytest.approx(-122.0, abs=1e-12)
        assert pose.heading == 0.25
        east = vehicle_pose(sc, 10.0, 0.0, 0.0)
        assert east.longitude > pose.longitude
        assert east.latitude == pytest.approx(37.0, abs=1e-9)

    def test_iter_frames_order(self):
        doc = base_doc()
        second = copy.deepcopy(doc["vehicles"][0])
        second["vehicle_id"] = "v2"
        second["trajectory"] = second["trajectory"] + [
            {"x": 30.0, "y": 0.0, "heading": 0.0}
        ]
        doc["vehicles"].append(second)
        sc = scenario_from_dict(doc)
        order = [(r.vehicle_index, r.frame_index) for r in iter_frames(sc)]
        assert order == [(0, 0), (0, 1), (1, 0), (1, 1), (1, 2)]


class TestFrameSerialization:
    def test_round_trip(self):
        sc = scenario_from_dict(base_doc())
        record = observe_frame(sc, 0, 1)
        graph, meta = frame_from_dict(frame_to_dict(record))
        assert dumps_graph(graph) == dumps_graph(record.graph)
        assert meta == record.meta

    def test_dumps_deterministic(self):
        sc = scenario_from_dict(base_doc())
        assert dumps_frame(observe_frame(sc, 0, 0)) == dumps_frame(
            observe_frame(sc, 0, 0)
        )

    def test_bad_version(self):
        with pytest.raises(ConfigError):
            frame_from_dict({"version": 2, "meta": {}, "graph": {}})
