from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, FrozenSet, List, Tuple

from utils.errors import ConfigError


@dataclass(frozen=True)
class SESLayerConfig:
    """Hyperparameters of one sampling-equivariant self-attention layer"""
    c_in: int
    c_out: int
    k: int = 7
    r1: int = 1
    r2: int = 4
    r3: int = 4
    # SAN-style ablation switches; the SES layer itself has neither positional
    # encoding nor a pass-through embedding
    positional_encoding: bool = False
    transformation_embedding: bool = True

    def __post_init__(self):
        """Validate channel arithmetic"""
        for name in ('c_in', 'c_out', 'k', 'r1', 'r2', 'r3'):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.k % 2 == 0:
            raise ConfigError(f"k must be odd, got {self.k}")
        if self.c_in % self.r1:
            raise ConfigError(f"r1={self.r1} must divide c_in={self.c_in}")
        if self.c_in % self.r2:
            raise ConfigError(f"r2={self.r2} must divide c_in={self.c_in}")
        if self.c_v % self.r3:
            raise ConfigError(f"r3={self.r3} must divide c_in/r1={self.c_v}")

    @property
    def c_v(self) -> int:
        return self.c_in // self.r1

    @property
    def c_qk(self) -> int:
        return self.c_in // self.r2

    @property
    def c_w(self) -> int:
        return self.c_v // self.r3

    @property
    def footprint(self) -> int:
        return self.k * self.k

    @property
    def pad(self) -> int:
        return (self.k - 1) // 2


ROUTING_CHOICES = ('qk', 'q', 'k', 'v', 'qv', 'kv', 'qkv', 'none')


@dataclass(frozen=True)
class RNMConfig:
    """Randomized normalization: noise variance r and which SES inputs see X''"""
    r: float = 0.005
    routing: FrozenSet[str] = frozenset({'q', 'k'})

    def __post_init__(self):
        if self.r < 0:
            raise ConfigError(f"RNM noise variance r must be >= 0, got {self.r}")
        unknown = set(self.routing) - {'q', 'k', 'v'}
        if unknown:
            raise ConfigError(f"unknown RNM routing targets: {sorted(unknown)}")

    @classmethod
    def from_string(cls, routing: str, r: float = 0.005) -> 'RNMConfig':
        if routing not in ROUTING_CHOICES:
            raise ConfigError(f"rnm routing must be one of {ROUTING_CHOICES}, got '{routing}'")
        targets = frozenset() if routing == 'none' else frozenset(routing)
        return cls(r=r, routing=targets)

    @property
    def enabled(self) -> bool:
        """False means plain BatchNorm in every block"""
        return bool(self.routing)

    @property
    def routing_name(self) -> str:
        return ''.join(t for t in 'qkv' if t in self.routing) or 'none'


@dataclass(frozen=True)
class NetworkConfig:
    """Toy SES classifier: stem, stages of residual SES blocks, pooled head"""
    widths: Tuple[int, ...] = (32, 64)
    blocks_per_stage: int = 2
    in_channels: int = 1
    num_classes: int = 4
    k: int = 7
    r1: int = 1
    r2: int = 4
    r3: int = 4
    rnm: RNMConfig = field(default_factory=RNMConfig)
    positional_encoding: bool = False
    transformation_embedding: bool = True

    def __post_init__(self):
        if not self.widths:
            raise ConfigError("network needs at least one stage")
        if self.blocks_per_stage <= 0 or self.num_classes <= 1 or self.in_channels <= 0:
            raise ConfigError("blocks_per_stage, in_channels must be positive and num_classes > 1")
        # surfaces divisibility problems at config time
        for c_in, c_out in self.block_channels():
            self.layer_config(c_in, c_out)

    def layer_config(self, c_in: int, c_out: int) -> SESLayerConfig:
        return SESLayerConfig(c_in=c_in, c_out=c_out, k=self.k, r1=self.r1, r2=self.r2, r3=self.r3,
                              positional_encoding=self.positional_encoding,
                              transformation_embedding=self.transformation_embedding)

    def block_channels(self) -> List[Tuple[int, int]]:
        """(c_in, c_out) per block in network order; the stem outputs widths[0]"""
        channels = []
        previous = self.widths[0]
        for width in self.widths:
            for _ in range(self.blocks_per_stage):
                channels.append((previous, width))
                previous = width
        return channels

    def stage_strides(self) -> List[int]:
        return [2 ** stage for stage in range(len(self.widths))]

    def san_ablation(self) -> 'NetworkConfig':
        """Same network with positional encoding restored and ζ as pass-through"""
        return replace(self, positional_encoding=True, transformation_embedding=False)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['widths'] = list(self.widths)
        data['rnm'] = {'r': self.rnm.r, 'routing': self.rnm.routing_name}
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'NetworkConfig':
        data = dict(data)
        rnm = data.pop('rnm', None)
        if rnm is not None:
            data['rnm'] = RNMConfig.from_string(rnm.get('routing', 'qk'), float(rnm.get('r', 0.005)))
        if 'widths' in data:
            data['widths'] = tuple(int(w) for w in data['widths'])
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"invalid network config: {e}") from e


@dataclass(frozen=True)
class TrainConfig:
    """SGD with momentum, folded weight decay and per-step cosine annealing"""
    epochs: int = 20
    batch_size: int = 32
    base_lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ConfigError("epochs and batch_size must be positive")
        if self.base_lr < 0 or not 0 <= self.momentum < 1 or self.weight_decay < 0:
            raise ConfigError("base_lr and weight_decay must be >= 0 and momentum in [0, 1)")
