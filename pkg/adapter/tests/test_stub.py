"""Stub model behavior: rectangle geometry and scripted answers."""

from __future__ import annotations

import numpy as np

from model_adapter.stub import (
    RectSegmenter,
    ScriptedResponder,
    load_script,
    prompt_hash,
    rect_mask,
)


class TestRectMask:
    def test_two_point_group_with_margin_five(self):
        raster = rect_mask(np.array([[10, 10], [20, 20]]), 40, 60, margin=5)
        expected = np.zeros((40, 60), bool)
        expected[5:26, 5:26] = True
        assert np.array_equal(raster, expected)

    def test_single_point_clamps_at_origin(self):
        raster = rect_mask(np.array([[2.0, 3.0]]), 30, 30, margin=5)
        assert raster[:9, :8].all()
        assert raster.sum() == 9 * 8

    def test_fractional_points_round_outward(self):
        raster = rect_mask(np.array([[10.4, 10.6]]), 40, 40, margin=0)
        assert raster[10:12, 10:12].all()
        assert raster.sum() == 4

    def test_group_outside_image_is_empty(self):
        raster = rect_mask(np.array([[200.0, 200.0]]), 40, 40, margin=5)
        assert not raster.any()

    def test_empty_group_is_empty(self):
        assert not rect_mask(np.zeros((0, 2)), 20, 20, margin=5).any()


class TestRectSegmenter:
    def test_one_mask_per_group_in_order(self):
        image = np.zeros((40, 60, 3), np.uint8)
        groups = [np.array([[10.0, 10.0], [20.0, 20.0]]), np.array([[30.0, 5.0]])]
        results = RectSegmenter(margin=5).segment(image, groups)
        assert len(results) == 2
        first, second = results
        assert first[0][5:26, 5:26].all() and first[0].sum() == 441
        assert second[0][0:11, 25:36].all() and second[0].sum() == 11 * 11
        assert first[1] == 1.0

    def test_propagate_reclamps_to_new_dims(self):
        image = np.zeros((40, 60, 3), np.uint8)
        seg = RectSegmenter(margin=5)
        state = seg.start_session(image, [np.array([[55.0, 35.0]])])
        small = np.zeros((20, 30, 3), np.uint8)
        results = seg.propagate(state, small)
        assert len(results) == 1
        assert not results[0][0].any()
        big = np.zeros((80, 80, 3), np.uint8)
        raster = seg.propagate(state, big)[0][0]
        assert raster[30:41, 50:61].all() and raster.sum() == 121

    def test_deterministic(self):
        image = np.zeros((32, 32, 3), np.uint8)
        groups = [np.array([[8.0, 8.0], [12.0, 15.0]])]
        a = RectSegmenter().segment(image, groups)
        b = RectSegmenter().segment(image, groups)
        assert np.array_equal(a[0][0], b[0][0]) and a[0][1] == b[0][1]


class TestScriptedResponder:
    def test_scripted_answer(self):
        responder = ScriptedResponder({prompt_hash("How many?"): "3"})
        assert responder.complete("How many?", [], None) == "3"

    def test_unscripted_fallback_is_stable_and_nonempty(self):
        responder = ScriptedResponder({})
        first = responder.complete("anything", [], None)
        second = responder.complete("anything", [], None)
        assert first == second and first.startswith("stub:") and len(first) > 5

    def test_different_prompts_get_different_fallbacks(self):
        responder = ScriptedResponder({})
        assert responder.complete("a", [], None) != responder.complete("b", [], None)


class TestLoadScript:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text('{"abc": "yes"}')
        assert load_script(path) == {"abc": "yes"}

    def test_rejects_non_string_values(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text('{"abc": 3}')
        try:
            load_script(path)
        except ValueError as exc:
            assert "script" in str(exc)
        else:
            raise AssertionError("expected ValueError")
