from __future__ import annotations

from .types import Detection, StereoDetectionPair

DEFAULT_ROW_TOL = 10.0


def match_stereo(left: list[Detection], right: list[Detection], row_tol: float = DEFAULT_ROW_TOL) -> list[StereoDetectionPair]:
    """Greedy one-to-one association of left/right detections.

    A candidate needs the same label, positive disparity and a row offset
    within ``row_tol``. Candidates are taken in order of smallest row offset,
    then largest confidence sum, then smallest horizontal offset; ties beyond
    that fall back to input order so the result is deterministic. Pairs are
    returned in left-detection order.
    """
    cands = []
    for i, dl in enumerate(left):
        for j, dr in enumerate(right):
            if dl.label != dr.label:
                continue
            dx = dl.center.x - dr.center.x
            dy = abs(dl.center.y - dr.center.y)
            if dx <= 0 or dy > row_tol:
                continue
            cands.append((dy, -(dl.confidence + dr.confidence), dx, i, j))
    cands.sort()
    used_l, used_r = set(), set()
    chosen = []
    for _, _, _, i, j in cands:
        if i in used_l or j in used_r:
            continue
        used_l.add(i)
        used_r.add(j)
        chosen.append((i, j))
    chosen.sort()
    return [StereoDetectionPair(left[i], right[j]) for i, j in chosen]
