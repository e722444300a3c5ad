"""Overlapping-class maps for the Daily-DA and Sports-DA benchmarks and the
manifest builder that applies them."""

from __future__ import annotations

from ..errors import CompletenessError, ConfigError
from .formats import Manifest

# class -> {dataset: raw labels}; class order defines the label index
DAILY_DATASETS = ("arid", "hmdb51", "mit", "kinetics")
DAILY_CLASSES = {
    "Drink": {"arid": ["Drink"], "hmdb51": ["drink"], "mit": ["drinking"], "kinetics": ["drinking shots"]},
    "Jump": {"arid": ["Jump"], "hmdb51": ["jump"], "mit": ["jumping"],
             "kinetics": ["jumping bicycle", "jumping into pool", "jumping jacks"]},
    "Pick": {"arid": ["Pick"], "hmdb51": ["pick"], "mit": ["picking"], "kinetics": ["picking fruit"]},
    "Pour": {"arid": ["Pour"], "hmdb51": ["pour"], "mit": ["pouring"], "kinetics": ["pouring beer"]},
    "Push": {"arid": ["Push"], "hmdb51": ["push"], "mit": ["pushing"],
             "kinetics": ["pushing car", "pushing cart", "pushing wheelbarrow", "pushing wheelchair"]},
    "Run": {"arid": ["Run"], "hmdb51": ["run"], "mit": ["running"], "kinetics": ["running on treadmill"]},
    "Walk": {"arid": ["Walk"], "hmdb51": ["walk"], "mit": ["walking"],
             "kinetics": ["walking the dog", "walking through snow"]},
    "Wave": {"arid": ["Wave"], "hmdb51": ["wave"], "mit": ["waving"], "kinetics": ["waving hand"]},
}

SPORTS_DATASETS = ("ucf101", "sports1m", "kinetics")
_SPORTS_ROWS = [
    ("Archery", ["archery"], ["archery"]),
    ("Baseball Pitch", ["baseball"], ["catching or throwing baseball", "hitting baseball"]),
    ("Basketball Shooting", ["basketball"], ["playing basketball", "shooting basketball"]),
    ("Biking", ["bicycle"], ["riding a bike"]),
    ("Bowling", ["bowling"], ["bowling"]),
    ("Breaststroke", ["breaststroke"], ["swimming breast stroke"]),
    ("Diving", ["diving"], ["springboard diving"]),
    ("Fencing", ["fencing"], ["fencing (sport)"]),
    ("Field Hockey Penalty", ["field hockey"], ["playing field hockey"]),
    ("Floor Gymnastics", ["floor (gymnastics)"], ["gymnastics tumbling"]),
    ("Golf Swing", ["golf"], ["golf chipping", "golf driving", "golf putting"]),
    ("Horse Race", ["horse racing"], ["riding or walking with horse"]),
    ("Kayaking", ["kayaking"], ["canoeing or kayaking"]),
    ("Rock Climbing Indoor", ["rock climbing"], ["rock climbing"]),
    ("Rope Climbing", ["rope climbing"], ["climbing a rope"]),
    ("Skate Boarding", ["skateboarding"], ["skateboarding"]),
    ("Skiing", ["skiing"], ["skiing crosscountry", "skiing mono"]),
    ("Sumo Wrestling", ["sumo"], ["wrestling"]),
    ("Surfing", ["surfing"], ["surfing water"]),
    ("Tai Chi", ["t'ai chi ch'uan"], ["tai chi"]),
    ("Tennis Swing", ["tennis"], ["playing tennis"]),
    ("Trampoline Jumping", ["trampolining"], ["bouncing on trampoline"]),
    ("Volleyball Spiking", ["volleyball"], ["playing volleyball"]),
]
SPORTS_CLASSES = {name: {"ucf101": [name], "sports1m": s1m, "kinetics": kin} for name, s1m, kin in _SPORTS_ROWS}

BENCHMARKS = {
    "daily": (DAILY_DATASETS, DAILY_CLASSES),
    "sports": (SPORTS_DATASETS, SPORTS_CLASSES),
}

ALIASES = {
    "a": "arid", "h": "hmdb51", "hmdb": "hmdb51", "m": "mit", "moments-in-time": "mit", "moments": "mit",
    "k": "kinetics", "kinetics-600": "kinetics", "u": "ucf101", "ucf": "ucf101", "s": "sports1m",
    "sports-1m": "sports1m",
}


def _norm(label: str) -> str:
    # whitespace and underscores are ignored so "BaseballPitch" matches "Baseball Pitch"
    return "".join(label.lower().replace("_", " ").split())


def canonical_dataset(name: str) -> str:
    key = name.strip().lower()
    return ALIASES.get(key, key)


def class_names(benchmark: str) -> list[str]:
    return list(_benchmark(benchmark)[1])


def label_map(benchmark: str, dataset: str) -> dict[str, int]:
    """Normalized raw label -> class index for one constituent dataset."""
    datasets, classes = _benchmark(benchmark)
    dataset = canonical_dataset(dataset)
    if dataset not in datasets:
        raise ConfigError(f"{dataset!r} is not part of the {benchmark} benchmark ({', '.join(datasets)})")
    return {_norm(raw): idx for idx, per_ds in enumerate(classes.values()) for raw in per_ds[dataset]}


def _benchmark(benchmark: str):
    try:
        return BENCHMARKS[benchmark.lower()]
    except KeyError:
        raise ConfigError(f"unknown benchmark {benchmark!r}; expected daily or sports") from None


def build_manifest(benchmark: str, listings: dict[str, list[tuple[str, str]]], role: str = "source",
                   require_complete: bool = True) -> dict[str, Manifest]:
    """Map each dataset's (raw_label, path) listing onto the shared class set.

    Labels outside the map are dropped. With ``require_complete`` every class
    must keep at least one video in every listed dataset.
    """
    names = class_names(benchmark)
    out = {}
    for dataset, records in listings.items():
        ds = canonical_dataset(dataset)
        mapping = label_map(benchmark, ds)
        kept = []
        for raw, path in records:
            idx = mapping.get(_norm(raw))
            if idx is not None:
                kept.append((path, -1 if role == "target-train" else idx, ds))
        if require_complete:
            present = {mapping[_norm(raw)] for raw, _ in records if _norm(raw) in mapping}
            missing = [names[i] for i in range(len(names)) if i not in present]
            if missing:
                raise CompletenessError(f"class {missing[0]!r} has no videos in domain {ds!r}"
                                        + (f" (also missing: {', '.join(missing[1:])})" if len(missing) > 1 else ""))
        out[ds] = Manifest(len(names), kept, role)
    return out
