from tpng.model.diagram import (  # noqa: F401
    Diagram,
    HorizontalSegment,
    Point,
    RectFlux,
    VerticalSegment,
    Vertex,
    VertexKind,
)
from tpng.model.schemas import Box, BoundarySpec, ModelParams  # noqa: F401
