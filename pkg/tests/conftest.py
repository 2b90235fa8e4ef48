import pytest

from motkit.data_model import (
    AnnotationSet,
    BBox,
    Category,
    GtAnnotation,
    VideoMeta,
)


def make_video(vid=1, name=None, width=800, height=600, frame_count=30, fps=30.0, ann_fps=None):
    return VideoMeta(
        id=vid,
        name=name or f"video_{vid}",
        width=width,
        height=height,
        frame_count=frame_count,
        fps=fps,
        ann_fps=ann_fps if ann_fps is not None else fps,
    )


@pytest.fixture
def minimal_set():
    return AnnotationSet(
        videos=[make_video(1)],
        categories=[Category(id=1, name="dog")],
        annotations=[GtAnnotation(1, 0, 1, 1, BBox(10, 20, 30, 40))],
    )


@pytest.fixture
def three_video_set():
    videos = [make_video(v, frame_count=10 + v) for v in (1, 2, 3)]
    categories = [Category(id=1, name="dog"), Category(id=2, name="cat")]
    annotations = []
    track = 1
    for v in (1, 2, 3):
        for t in range(2):
            for f in range(0, 6, 2):
                bbox = None if (t == 1 and f == 2) else BBox(10.0 + f, 20.0 + v, 15.0, 25.0)
                annotations.append(
                    GtAnnotation(v, f, track, 1 + (t % 2), bbox)
                )
            track += 1
    return AnnotationSet(videos=videos, categories=categories, annotations=annotations)
