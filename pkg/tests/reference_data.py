"""Hand-built 12 x 8 diagram with every contact scripted, plus a layer on top of it."""
from tpng.model.schemas import Box
from tpng.sampling.streams import ScriptedCoins
from tpng.services.coupling import build_layer
from tpng.services.sweep import build_diagram_from_points

REF_BOX = Box(width=12, height=8)
REF_SOURCES = [3, 5, 8, 11.5]
REF_SINKS = [1, 3, 4, 6, 7.5]
REF_BULK = [
    (2, 5), (2.4, 2.5), (2.8, 6.9), (4, 0.5), (5.8, 2),
    (6, 3.8), (7, 7), (8.5, 4.5), (9.5, 1.4), (11, 5.5),
]
REF_CORNERS = [
    (4, 5), (2, 6), (5.8, 2.5), (2.4, 4), (8, 3.8), (6, 6.9),
    (2.8, 7.5), (3, 1), (5, 3), (11.5, 1.4), (9.5, 4.5), (8.5, 7),
]
REF_CROSSINGS = [
    (5, 0.5), (8, 0.5), (11.5, 0.5), (8, 2), (9.5, 2),
    (4, 2.5), (5, 2.5), (2.4, 3), (4, 3),
]

LAYER_EXTRA_SOURCES = [1.5, 6.3, 10]
LAYER_DROPPED_SINKS = [4, 7.5]
# contacts where a second-class particle turns right instead of crossing
LAYER_TURNS = [(6.3, 0.5), (1.5, 6)]


def make_reference_diagram(t=0.5):
    return build_diagram_from_points(
        REF_BOX, t, REF_SOURCES, REF_SINKS, REF_BULK, ScriptedCoins(corners=REF_CORNERS)
    )


def make_reference_layer(base):
    return build_layer(base, LAYER_EXTRA_SOURCES, LAYER_DROPPED_SINKS, 0.5, ScriptedCoins(corners=LAYER_TURNS))
