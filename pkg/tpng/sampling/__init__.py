from tpng.sampling.poisson import sample_poisson_1d, sample_poisson_2d, thin  # noqa: F401
from tpng.sampling.streams import (  # noqa: F401
    CoinSource,
    RngStreams,
    ScriptedCoins,
    SequentialCoins,
    StreamCoins,
    parse_seed,
)
