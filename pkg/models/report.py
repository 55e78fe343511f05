import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import pandas as pd


@dataclass
class AEMDRecord:
    """One probed image: its transform, stride, centers and per-layer EMDs"""
    image_index: int
    transform_params: Dict[str, Any]
    stride: int
    center: Tuple[int, int]
    mapped_center: Tuple[int, int]
    # layer id -> EMD per mask channel, in input-pixel units
    layer_emds: Dict[int, List[float]]


@dataclass
class AEMDReport:
    """Aggregate AEMD for one transform kind with its per-image breakdown"""
    transform_kind: str
    alpha: float
    image_side: int
    seed: int
    sampler: str
    records: List[AEMDRecord] = field(default_factory=list)
    aggregate: float = 0.0

    def to_frame(self) -> pd.DataFrame:
        """One row per (image, layer, channel) EMD"""
        rows = [
            {'image': record.image_index, 'layer': layer, 'channel': channel, 'emd': value}
            for record in self.records
            for layer, values in record.layer_emds.items()
            for channel, value in enumerate(values)
        ]
        return pd.DataFrame(rows, columns=['image', 'layer', 'channel', 'emd'])

    def recompute_aggregate(self) -> float:
        """alpha times the image-, layer-, channel-nested mean of the stored EMDs"""
        frame = self.to_frame()
        if frame.empty:
            return 0.0
        per_layer = frame.groupby(['image', 'layer'], sort=False)['emd'].mean()
        per_image = per_layer.groupby(level='image', sort=False).mean()
        return float(self.alpha * per_image.mean())

    def finalize(self) -> 'AEMDReport':
        self.aggregate = self.recompute_aggregate()
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for record in data['records']:
            record['center'] = list(record['center'])
            record['mapped_center'] = list(record['mapped_center'])
            record['layer_emds'] = {str(layer): values for layer, values in record['layer_emds'].items()}
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AEMDReport':
        records = [
            AEMDRecord(
                image_index=int(r['image_index']),
                transform_params=dict(r['transform_params']),
                stride=int(r['stride']),
                center=tuple(r['center']),
                mapped_center=tuple(r['mapped_center']),
                layer_emds={int(layer): [float(v) for v in values]
                            for layer, values in r['layer_emds'].items()},
            )
            for r in data['records']
        ]
        return cls(transform_kind=data['transform_kind'], alpha=float(data['alpha']),
                   image_side=int(data['image_side']), seed=int(data['seed']),
                   sampler=data['sampler'], records=records, aggregate=float(data['aggregate']))

    def write_json(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def read_json(cls, path: Union[str, Path]) -> 'AEMDReport':
        return cls.from_dict(json.loads(Path(path).read_text()))
