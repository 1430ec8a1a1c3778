"""Two-layer detection validation.

Layer 1 (structural, fatal for the offending frame): field presence, JSON
types, numeric ranges, and per-frame person_id uniqueness/density. A batch is
accepted iff it produced zero structural errors.

Layer 2 (geometric, never fatal): box ordering and in-bounds checks that the
prompt requests but the model does not guarantee. Enforcement is an explicit
opt-in via GeometryPolicy; the default posture is to warn and pass detections
through untouched.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field
from typing import Annotated, Any, Sequence

from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic.functional_validators import BeforeValidator

from .contract import AttributeSpec, BatchDetections


def _json_int(value: Any) -> Any:
    # JSON numbers only: bools and numeric strings are type errors, an
    # integral float (10.0) is accepted as its integer value.
    if isinstance(value, bool):
        raise ValueError("expected an integer, got a boolean")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise ValueError(f"expected an integer, got {type(value).__name__}")


def _json_real(value: Any) -> Any:
    if isinstance(value, bool):
        raise ValueError("expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    raise ValueError(f"expected a number, got {type(value).__name__}")


def _str_only(value: Any) -> Any:
    if not isinstance(value, str):
        raise ValueError(f"expected a string, got {type(value).__name__}")
    return value


NonNegInt = Annotated[int, BeforeValidator(_json_int), Field(ge=0)]
UnitReal = Annotated[float, BeforeValidator(_json_real), Field(ge=0.0, le=1.0)]
JsonStr = Annotated[str, BeforeValidator(_str_only)]


class BoundingBox(BaseModel):
    """Pixel box. Non-negativity is structural; ordering and bounds are geometric."""

    model_config = ConfigDict(extra="allow", frozen=True)

    x_min: NonNegInt
    y_min: NonNegInt
    x_max: NonNegInt
    y_max: NonNegInt

    def as_list(self) -> list[int]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


class Detection(BaseModel):
    """One person hypothesis with a frame-local id and a flexible attribute map."""

    model_config = ConfigDict(extra="allow", frozen=True)

    person_id: NonNegInt
    bbox: BoundingBox
    confidence: UnitReal
    analysis_result: dict[str, JsonStr]


class GeometryPolicy(str, enum.Enum):
    WARN = "warn"
    CLAMP = "clamp"
    DROP = "drop"


@dataclass(frozen=True)
class StructuralError:
    frame_index: int
    path: str
    kind: str  # missing_field | wrong_type | range | duplicate_person_id | person_id_gap | missing_attribute
    detail: str

    def to_json(self) -> dict:
        return {
            "frame_index": self.frame_index,
            "path": self.path,
            "kind": self.kind,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class GeometricWarning:
    frame_index: int
    person_id: int
    kind: str  # inverted_x | inverted_y | out_of_bounds_x | out_of_bounds_y | degenerate_after_clamp
    original: tuple[int, int, int, int]
    sanitized: tuple[int, int, int, int] | str | None  # box, "dropped", or None (unchanged)

    def to_json(self) -> dict:
        sanitized: Any = self.sanitized
        if isinstance(sanitized, tuple):
            sanitized = list(sanitized)
        return {
            "frame_index": self.frame_index,
            "person_id": self.person_id,
            "kind": self.kind,
            "original": list(self.original),
            "sanitized": sanitized,
        }


@dataclass
class ValidationReport:
    """Machine-readable outcome of validating one batch.

    The batch is accepted iff structural_errors is empty. Geometric findings
    and parse-stage notes never reject a batch.
    """

    batch_index: int = 0
    structural_errors: list[StructuralError] = dc_field(default_factory=list)
    geometric_warnings: list[GeometricWarning] = dc_field(default_factory=list)
    notes: list[str] = dc_field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return not self.structural_errors

    def frames_with_errors(self) -> set[int]:
        return {e.frame_index for e in self.structural_errors}

    def to_json(self) -> dict:
        return {
            "batch_index": self.batch_index,
            "accepted": self.accepted,
            "structural_errors": [e.to_json() for e in self.structural_errors],
            "geometric_warnings": [w.to_json() for w in self.geometric_warnings],
            "notes": list(self.notes),
        }


_KIND_BY_PYDANTIC_TYPE = {
    "missing": "missing_field",
    "greater_than_equal": "range",
    "less_than_equal": "range",
}


def _error_kind(pydantic_type: str) -> str:
    return _KIND_BY_PYDANTIC_TYPE.get(pydantic_type, "wrong_type")


def _loc_path(frame_index: int, det_index: int, loc: tuple) -> str:
    parts = [str(frame_index), str(det_index)]
    for item in loc:
        # pydantic appends per-key locs for dict values; keep them readable
        parts.append(str(item))
    return "/" + "/".join(parts)


def validate_structural(
    batch: BatchDetections,
    attribute_spec: AttributeSpec | None = None,
    batch_index: int = 0,
) -> ValidationReport:
    """Check field presence, types, ranges, and per-frame person_id contract.

    Never raises and never mutates the batch; violations are data. When an
    attribute_spec is given, each analysis_result must contain every requested
    key (missing key is structural); extra keys are only noted.
    """
    report = ValidationReport(batch_index=batch_index)
    report.notes.extend(batch.parse_warnings)

    for frame_index in sorted(batch.entries):
        raw_detections = batch.entries[frame_index]
        person_ids: list[int] = []
        frame_clean = True
        for det_index, raw in enumerate(raw_detections):
            if not isinstance(raw, dict):
                report.structural_errors.append(
                    StructuralError(
                        frame_index,
                        _loc_path(frame_index, det_index, ()),
                        "wrong_type",
                        f"detection entry is {type(raw).__name__}, expected an object",
                    )
                )
                frame_clean = False
                continue
            try:
                detection = Detection.model_validate(raw)
            except ValidationError as exc:
                frame_clean = False
                for err in exc.errors():
                    report.structural_errors.append(
                        StructuralError(
                            frame_index,
                            _loc_path(frame_index, det_index, err["loc"]),
                            _error_kind(err["type"]),
                            err["msg"],
                        )
                    )
                continue
            person_ids.append(detection.person_id)
            if attribute_spec is not None:
                for name in attribute_spec.attributes:
                    if name not in detection.analysis_result:
                        report.structural_errors.append(
                            StructuralError(
                                frame_index,
                                _loc_path(frame_index, det_index, ("analysis_result", name)),
                                "missing_attribute",
                                f"requested attribute {name!r} absent",
                            )
                        )
                        frame_clean = False
                for name in detection.analysis_result:
                    if name not in attribute_spec.attributes:
                        report.notes.append(
                            f"extra_attribute: frame {frame_index} detection "
                            f"{det_index} key {name!r}"
                        )

        # The id contract is only judged on frames whose detections all parsed;
        # otherwise the frame is already rejected and id checks would double-report.
        if frame_clean and person_ids:
            seen: set[int] = set()
            for pid in person_ids:
                if pid in seen:
                    report.structural_errors.append(
                        StructuralError(
                            frame_index,
                            f"/{frame_index}",
                            "duplicate_person_id",
                            f"duplicate person_id {pid}",
                        )
                    )
                seen.add(pid)
            expected_ids = set(range(len(person_ids)))
            if len(seen) == len(person_ids) and seen != expected_ids:
                report.structural_errors.append(
                    StructuralError(
                        frame_index,
                        f"/{frame_index}",
                        "person_id_gap",
                        f"person_id values {sorted(seen)} do not form 0..{len(person_ids) - 1}",
                    )
                )
    return report


def typed_detections(raw_detections: Sequence[dict]) -> list[Detection]:
    """Convert raw dicts that already passed structural validation."""
    return [Detection.model_validate(raw) for raw in raw_detections]


def _clamp(v: int, lo: int, hi: int) -> int:
    return max(lo, min(v, hi))


def _violations(box: BoundingBox, width: int, height: int) -> list[str]:
    found = []
    if box.x_min >= box.x_max:
        found.append("inverted_x")
    if box.y_min >= box.y_max:
        found.append("inverted_y")
    if box.x_max > width:
        found.append("out_of_bounds_x")
    if box.y_max > height:
        found.append("out_of_bounds_y")
    return found


def validate_geometric(
    frame_index: int,
    detections: Sequence[Detection],
    width: int,
    height: int,
    policy: GeometryPolicy,
) -> tuple[list[Detection], list[GeometricWarning]]:
    """Report (and optionally sanitize) geometric violations for one frame.

    warn: pass-through, never changes a detection. clamp: clip coordinates to
    the image, dropping boxes that become degenerate. drop: remove every
    violating detection. Under clamp/drop the output satisfies all four
    geometric invariants.
    """
    kept: list[Detection] = []
    warnings: list[GeometricWarning] = []
    for det in detections:
        box = det.bbox
        original = (box.x_min, box.y_min, box.x_max, box.y_max)
        kinds = _violations(box, width, height)
        if not kinds:
            kept.append(det)
            continue

        if policy is GeometryPolicy.WARN:
            for kind in kinds:
                warnings.append(GeometricWarning(frame_index, det.person_id, kind, original, None))
            kept.append(det)
        elif policy is GeometryPolicy.DROP:
            for kind in kinds:
                warnings.append(
                    GeometricWarning(frame_index, det.person_id, kind, original, "dropped")
                )
        else:  # CLAMP
            nx_min = _clamp(box.x_min, 0, width)
            nx_max = _clamp(box.x_max, 0, width)
            ny_min = _clamp(box.y_min, 0, height)
            ny_max = _clamp(box.y_max, 0, height)
            if nx_min >= nx_max or ny_min >= ny_max:
                for kind in kinds:
                    warnings.append(
                        GeometricWarning(frame_index, det.person_id, kind, original, "dropped")
                    )
                warnings.append(
                    GeometricWarning(
                        frame_index, det.person_id, "degenerate_after_clamp", original, "dropped"
                    )
                )
                continue
            sanitized = (nx_min, ny_min, nx_max, ny_max)
            for kind in kinds:
                warnings.append(
                    GeometricWarning(frame_index, det.person_id, kind, original, sanitized)
                )
            kept.append(
                det.model_copy(
                    update={
                        "bbox": BoundingBox(
                            x_min=nx_min, y_min=ny_min, x_max=nx_max, y_max=ny_max
                        )
                    }
                )
            )
    return kept, warnings
