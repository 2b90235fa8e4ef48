import numpy as np
import pytest

from motkit.data_model import AnnotationSet, BBox, Category, GtAnnotation
from motkit.stats import (
    LENGTH_LONG,
    LENGTH_MEDIUM,
    LENGTH_SHORT,
    SHAPE_COMPLEX,
    SHAPE_INTERMEDIATE,
    SHAPE_NORMAL,
    SIZE_LARGE,
    SIZE_MEDIUM,
    SIZE_SMALL,
    classify_object,
    classify_track_length,
    compute_track_attributes,
    dataset_summary,
    stats_report,
)
from motkit.data_model import validate_annotation_set

from conftest import make_video


def ann(frame, track, cat=1, box=(0.0, 0.0, 10.0, 10.0), video=1):
    return GtAnnotation(video, frame, track, cat, BBox(*box) if box else None)


class TestDatasetSummary:
    def test_empty(self):
        s = dataset_summary(AnnotationSet(videos=[], categories=[], annotations=[]))
        assert (s.n_classes, s.n_videos, s.n_tracks, s.n_boxes, s.n_frames) == (0, 0, 0, 0, 0)

    def test_constructed_fixture(self):
        videos = [make_video(1, frame_count=20), make_video(2, frame_count=20)]
        cats = [Category(i, f"c{i}") for i in (1, 2, 3)]
        annotations = []
        # 4 tracks, 10 present boxes, one null record
        for t, (video, n) in enumerate([(1, 3), (1, 3), (2, 2), (2, 2)], start=1):
            for f in range(n):
                annotations.append(ann(f, t, cat=1 + t % 3, video=video))
        annotations.append(GtAnnotation(1, 5, 1, 2, None))
        aset = AnnotationSet(videos=videos, categories=cats, annotations=annotations)
        s = dataset_summary(aset)
        assert (s.n_classes, s.n_videos, s.n_tracks, s.n_boxes) == (3, 2, 4, 10)
        assert s.n_frames == 6  # frames {0,1,2,5} in video 1 plus {0,1} in video 2

    def test_frames_count_distinct_annotated(self):
        videos = [make_video(1, frame_count=20)]
        aset = AnnotationSet(
            videos=videos,
            categories=[Category(1, "c")],
            annotations=[ann(0, 1), ann(0, 2), ann(7, 1)],
        )
        assert dataset_summary(aset).n_frames == 2
        assert dataset_summary(aset).objects_per_frame_range == (1, 2)

    def test_ranges(self):
        videos = [
            make_video(1, height=480, frame_count=30, fps=30.0, ann_fps=5.0),
            make_video(2, height=1080, frame_count=300, fps=30.0, ann_fps=30.0),
        ]
        aset = AnnotationSet(videos=videos, categories=[Category(1, "c")],
                             annotations=[ann(0, 1)])
        s = dataset_summary(aset)
        assert s.resolution_range == (480, 1080)
        assert s.duration_range == (1.0, 10.0)
        assert s.ann_fps_range == (5.0, 30.0)

    def test_permutation_invariant(self, three_video_set):
        base = dataset_summary(three_video_set)
        rng = np.random.default_rng(1)
        shuffled = list(three_video_set.annotations)
        rng.shuffle(shuffled)
        again = dataset_summary(
            AnnotationSet(
                videos=three_video_set.videos,
                categories=three_video_set.categories,
                annotations=shuffled,
            )
        )
        assert base == again

    def test_counts_agree_with_validator(self, three_video_set):
        assert validate_annotation_set(three_video_set) == []
        s = dataset_summary(three_video_set)
        assert s.n_boxes == sum(1 for a in three_video_set.annotations if a.bbox is not None)


class TestTrackAttributes:
    meta = make_video(1, width=1000, height=800, frame_count=100)

    def test_static_visible_track(self):
        track = [ann(f, 1, box=(100, 100, 40, 40)) for f in range(5)]
        flags = compute_track_attributes(track, self.meta)
        assert not any(
            [flags.occluded_track, flags.fast_motion, flags.out_of_view, flags.shape_change]
        )

    def test_fast_motion_threshold(self):
        # width 1000 -> threshold 40; centers move 50
        track = [ann(0, 1, box=(100, 100, 40, 40)), ann(1, 1, box=(150, 100, 40, 40))]
        assert compute_track_attributes(track, self.meta).fast_motion
        slow = [ann(0, 1, box=(100, 100, 40, 40)), ann(1, 1, box=(139, 100, 40, 40))]
        assert not compute_track_attributes(slow, self.meta).fast_motion

    def test_out_of_view(self):
        track = [ann(0, 1, box=(-5, 10, 20, 20))]
        assert compute_track_attributes(track, self.meta).out_of_view

    def test_occluded_track_interior_null(self):
        track = [ann(0, 1), ann(1, 1, box=None), ann(2, 1)]
        assert compute_track_attributes(track, self.meta).occluded_track
        no_gap = [ann(0, 1), ann(1, 1)]
        assert not compute_track_attributes(no_gap, self.meta).occluded_track

    def test_shape_change_relative(self):
        # aspect 1.0 -> 1.25: relative change 0.25 > 0.2
        track = [ann(0, 1, box=(0, 0, 40, 40)), ann(1, 1, box=(0, 0, 50, 40))]
        assert compute_track_attributes(track, self.meta).shape_change
        mild = [ann(0, 1, box=(0, 0, 40, 40)), ann(1, 1, box=(0, 0, 44, 40))]
        assert not compute_track_attributes(mild, self.meta).shape_change


class TestObjectClassing:
    meta = make_video(1, width=100, height=100, frame_count=100)

    @pytest.mark.parametrize(
        "box,expected",
        [
            ((0, 0, 80, 75), SIZE_LARGE),  # area fraction 0.6
            ((0, 0, 50, 100), SIZE_LARGE),  # exactly 1/2 -> larger class
            ((0, 0, 40, 50), SIZE_MEDIUM),  # 0.2
            ((0, 0, 20, 50), SIZE_MEDIUM),  # exactly 1/10
            ((0, 0, 10, 10), SIZE_SMALL),  # 0.01
        ],
    )
    def test_size_classes(self, box, expected):
        assert classify_object(BBox(*box), self.meta)[0] == expected

    @pytest.mark.parametrize(
        "w,h,expected",
        [
            (10, 10, SHAPE_NORMAL),  # aspect 1.0
            (60, 10, SHAPE_COMPLEX),  # 6
            (50, 10, SHAPE_COMPLEX),  # exactly 5 -> more extreme class
            (10, 50, SHAPE_COMPLEX),  # exactly 1/5
            (30, 10, SHAPE_INTERMEDIATE),  # 3
            (20, 10, SHAPE_INTERMEDIATE),  # exactly 2
            (10, 20, SHAPE_INTERMEDIATE),  # exactly 1/2
            (15, 10, SHAPE_NORMAL),  # 1.5
        ],
    )
    def test_shape_classes(self, w, h, expected):
        assert classify_object(BBox(0, 0, w, h), self.meta)[1] == expected

    def test_track_length_classes(self):
        meta = make_video(1, frame_count=100)
        long_track = [ann(f, 1) for f in range(5, 95)]  # span 90
        assert classify_track_length(long_track, meta) == LENGTH_LONG
        medium = [ann(f, 1) for f in range(0, 30)]
        assert classify_track_length(medium, meta) == LENGTH_MEDIUM
        boundary = [ann(0, 1), ann(79, 1)]  # span 80 -> exactly 4/5
        assert classify_track_length(boundary, meta) == LENGTH_LONG
        short = [ann(0, 1), ann(10, 1)]
        assert classify_track_length(short, meta) == LENGTH_SHORT


class TestStatsReport:
    def test_partitions_sum_to_totals(self, three_video_set):
        doc = stats_report(three_video_set)
        n_boxes = doc["summary"]["n_boxes"]
        assert sum(doc["object_size"].values()) == n_boxes
        assert sum(doc["object_shape"].values()) == n_boxes
        assert sum(doc["track_length"].values()) == doc["summary"]["n_tracks"]

    def test_attribute_fractions_bounded(self, three_video_set):
        doc = stats_report(three_video_set)
        for frac in doc["attributes"]["track_fractions"].values():
            assert 0.0 <= frac <= 1.0
        for frac in doc["attributes"]["video_fractions"].values():
            assert 0.0 <= frac <= 1.0

    def test_occluded_tracks_detected(self, three_video_set):
        # the fixture gives every second track an interior null record
        doc = stats_report(three_video_set)
        assert doc["attributes"]["track_counts"]["occluded_track"] == 3
