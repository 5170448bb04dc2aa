"""The four paired translation networks.

All of them map a 1x128x512 inverted-polarity image to a frame of the same
shape.  ``simple_cnn``, ``shallow`` and ``generator`` end in a sigmoid and
emit probabilities; ``unet`` ends in the identity and emits logits (it is
trained with the logits form of the cross entropy).

Reference configurations are pinned so that parameter counts are exact for
simple_cnn (28 065) and shallow (154 241) and land within 10% of the
published figures for unet and generator, whose full layer tables were
never released.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from destrike.imaging import NETWORK_HEIGHT, NETWORK_WIDTH

ARCH_NAMES = ("simple_cnn", "shallow", "unet", "generator")

CHECKPOINT_FORMAT_VERSION = 1


class ModelError(ValueError):
    pass


class ShapeError(ModelError):
    pass


class CheckpointError(ModelError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    """Architecture name plus the layer hyperparameters that matter.

    ``filters`` is interpreted per architecture: the down-chain widths for
    simple_cnn, (outer, inner) for shallow and generator, and (stem,
    up-transition) for unet.  ``growth``/``dense_layers`` configure the
    dense blocks of unet and generator.
    """

    arch: str
    final_activation: str = "sigmoid"
    filters: tuple[int, ...] = ()
    growth: int = 0
    dense_layers: int = 4
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def __post_init__(self) -> None:
        if self.arch not in ARCH_NAMES:
            raise ModelError(f"unknown architecture {self.arch!r}; expected one of {ARCH_NAMES}")
        if self.final_activation not in ("sigmoid", "identity"):
            raise ModelError(f"unknown final activation {self.final_activation!r}")
        # unet pairs identity output with the logits loss; the rest emit probabilities
        if (self.arch == "unet") != (self.final_activation == "identity"):
            raise ModelError(f"{self.arch} requires final_activation "
                             f"{'identity' if self.arch == 'unet' else 'sigmoid'}")

    @property
    def output_logits(self) -> bool:
        return self.final_activation == "identity"


def reference_config(arch: str) -> ModelConfig:
    """The pinned configuration used throughout the experiments."""
    if arch == "simple_cnn":
        return ModelConfig(arch=arch, filters=(16, 32, 32))
    if arch == "shallow":
        return ModelConfig(arch=arch, filters=(64, 128))
    if arch == "generator":
        return ModelConfig(arch=arch, filters=(64, 128), growth=64, dense_layers=4)
    if arch == "unet":
        return ModelConfig(arch=arch, final_activation="identity", filters=(16, 48),
                           growth=12, dense_layers=4)
    raise ModelError(f"unknown architecture {arch!r}")


class _DenseLayer(nn.Module):
    """BN -> ReLU -> 3x3 conv, output concatenated onto the input."""

    def __init__(self, in_channels: int, growth: int, momentum: float, eps: float):
        super().__init__()
        self.norm = nn.BatchNorm2d(in_channels, momentum=momentum, eps=eps)
        self.conv = nn.Conv2d(in_channels, growth, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.cat([x, self.conv(torch.relu(self.norm(x)))], dim=1)


def _dense_block(in_channels: int, growth: int, layers: int, momentum: float, eps: float) -> nn.Sequential:
    return nn.Sequential(
        *[_DenseLayer(in_channels + i * growth, growth, momentum, eps) for i in range(layers)]
    )


def _build_simple_cnn(cfg: ModelConfig) -> nn.Module:
    f1, f2, f3 = cfg.filters
    return nn.Sequential(
        nn.Conv2d(1, f1, 3, stride=2, padding=1), nn.ReLU(),
        nn.Conv2d(f1, f2, 3, stride=2, padding=1), nn.ReLU(),
        nn.Conv2d(f2, f3, 3, stride=2, padding=1), nn.ReLU(),
        nn.ConvTranspose2d(f3, f2, 3, stride=2, padding=1, output_padding=1), nn.ReLU(),
        nn.ConvTranspose2d(f2, f1, 3, stride=2, padding=1, output_padding=1), nn.ReLU(),
        nn.ConvTranspose2d(f1, 1, 3, stride=2, padding=1, output_padding=1),
        nn.Sigmoid(),
    )


def _build_shallow(cfg: ModelConfig) -> nn.Module:
    outer, inner = cfg.filters
    return nn.Sequential(
        nn.Conv2d(1, outer, 7, stride=2, padding=3),
        nn.BatchNorm2d(outer, momentum=cfg.bn_momentum, eps=cfg.bn_eps), nn.ReLU(),
        nn.Conv2d(outer, inner, 3, stride=2, padding=1), nn.ReLU(),
        nn.ConvTranspose2d(inner, outer, 3, stride=2, padding=1, output_padding=1),
        nn.BatchNorm2d(outer, momentum=cfg.bn_momentum, eps=cfg.bn_eps), nn.ReLU(),
        nn.ConvTranspose2d(outer, 1, 7, stride=2, padding=3, output_padding=1),
        nn.Sigmoid(),
    )


def _build_generator(cfg: ModelConfig) -> nn.Module:
    outer, inner = cfg.filters
    m, e = cfg.bn_momentum, cfg.bn_eps
    dense_out = inner + cfg.dense_layers * cfg.growth
    return nn.Sequential(
        nn.Conv2d(1, outer, 7, padding=3), nn.BatchNorm2d(outer, momentum=m, eps=e), nn.ReLU(),
        nn.Conv2d(outer, inner, 3, stride=2, padding=1), nn.BatchNorm2d(inner, momentum=m, eps=e), nn.ReLU(),
        nn.Conv2d(inner, inner, 3, stride=2, padding=1), nn.BatchNorm2d(inner, momentum=m, eps=e), nn.ReLU(),
        _dense_block(inner, cfg.growth, cfg.dense_layers, m, e),
        nn.ConvTranspose2d(dense_out, inner, 3, stride=2, padding=1, output_padding=1),
        nn.BatchNorm2d(inner, momentum=m, eps=e), nn.ReLU(),
        nn.ConvTranspose2d(inner, outer, 3, stride=2, padding=1, output_padding=1),
        nn.BatchNorm2d(outer, momentum=m, eps=e), nn.ReLU(),
        nn.Conv2d(outer, 1, 7, padding=3),
        nn.Sigmoid(),
    )


class _DenseUNet(nn.Module):
    """One dense down block, a dense bottleneck and one dense up block fed
    by the skip concatenation; identity head (logits out)."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        stem, up_c = cfg.filters
        g, L = cfg.growth, cfg.dense_layers
        m, e = cfg.bn_momentum, cfg.bn_eps
        self.stem = nn.Conv2d(1, stem, 3, padding=1)
        self.down = _dense_block(stem, g, L, m, e)
        d_out = stem + L * g
        self.trans_down = nn.Conv2d(d_out, d_out, 3, stride=2, padding=1)
        self.mid = _dense_block(d_out, g, L, m, e)
        self.trans_up = nn.ConvTranspose2d(d_out + L * g, up_c, 3, stride=2, padding=1, output_padding=1)
        self.up = _dense_block(up_c + d_out, g, L, m, e)
        self.head = nn.Conv2d(up_c + d_out + L * g, 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        skip = self.down(self.stem(x))
        x = self.mid(self.trans_down(skip))
        x = self.trans_up(x)
        x = self.up(torch.cat([x, skip], dim=1))
        return self.head(x)


_BUILDERS = {
    "simple_cnn": _build_simple_cnn,
    "shallow": _build_shallow,
    "generator": _build_generator,
    "unet": _DenseUNet,
}


def _init_parameters(module: nn.Module, seed: int) -> None:
    """Deterministic uniform fan-in init: U(-1/sqrt(fan_in), 1/sqrt(fan_in))
    for convolution weights and biases, the conventional (1, 0) for norms."""
    gen = torch.Generator().manual_seed(seed & 0xFFFF_FFFF_FFFF_FFFF)
    for layer in module.modules():
        if isinstance(layer, (nn.Conv2d, nn.ConvTranspose2d)):
            fan_in = layer.in_channels * layer.kernel_size[0] * layer.kernel_size[1]
            bound = 1.0 / math.sqrt(fan_in)
            with torch.no_grad():
                layer.weight.uniform_(-bound, bound, generator=gen)
                if layer.bias is not None:
                    layer.bias.uniform_(-bound, bound, generator=gen)
        elif isinstance(layer, nn.BatchNorm2d):
            with torch.no_grad():
                layer.weight.fill_(1.0)
                layer.bias.fill_(0.0)


@dataclass
class Model:
    """A built network plus the provenance needed to rebuild it."""

    module: nn.Module
    config: ModelConfig
    init_seed: int
    epoch: int = 0

    @property
    def arch(self) -> str:
        return self.config.arch

    @property
    def output_logits(self) -> bool:
        return self.config.output_logits

    def forward(self, batch: np.ndarray | torch.Tensor) -> np.ndarray | torch.Tensor:
        """Run the network; numpy in, numpy out (and likewise for tensors).

        Sigmoid-headed models return probabilities in (0, 1); unet returns
        raw scores.
        """
        is_numpy = isinstance(batch, np.ndarray)
        t = torch.from_numpy(np.ascontiguousarray(batch, dtype=np.float32)) if is_numpy else batch
        if t.ndim != 4 or tuple(t.shape[1:]) != (1, NETWORK_HEIGHT, NETWORK_WIDTH):
            raise ShapeError(
                f"expected a Bx1x{NETWORK_HEIGHT}x{NETWORK_WIDTH} batch, got {tuple(t.shape)}"
            )
        was_training = self.module.training
        self.module.eval()
        try:
            with torch.no_grad():
                out = self.module(t)
        finally:
            self.module.train(was_training)
        return out.numpy() if is_numpy else out

    def predict(self, batch: np.ndarray) -> np.ndarray:
        """Probabilities in [0, 1] regardless of head type."""
        out = self.forward(batch)
        if self.output_logits:
            out = 1.0 / (1.0 + np.exp(-out.astype(np.float64)))
        return np.clip(out, 0.0, 1.0).astype(np.float32)

    def parameter_count(self) -> int:
        return parameter_count(self)


def build_model(config: ModelConfig, init_seed: int) -> Model:
    """Construct and deterministically initialise one network.

    A dummy frame is pushed through at build time; a layer chain that
    cannot reproduce the 128x512 geometry raises :class:`ShapeError`.
    """
    module = _BUILDERS[config.arch](config)
    _init_parameters(module, init_seed)
    module.eval()
    with torch.no_grad():
        probe = torch.zeros(1, 1, NETWORK_HEIGHT, NETWORK_WIDTH)
        out = module(probe)
    if out.shape != probe.shape:
        raise ShapeError(
            f"{config.arch}: {tuple(probe.shape)} input produced {tuple(out.shape)} output"
        )
    module.train()
    return Model(module=module, config=config, init_seed=init_seed)


def parameter_count(model: Model) -> int:
    """Total number of trainable parameter elements."""
    return sum(p.numel() for p in model.module.parameters() if p.requires_grad)


def save_checkpoint(model: Model, path: str | Path) -> None:
    """Single-file checkpoint: config, seed, epoch, parameters, format tag."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "arch": model.arch,
        "config": asdict(model.config),
        "init_seed": model.init_seed,
        "epoch": model.epoch,
        "state_dict": model.module.state_dict(),
    }
    torch.save(payload, path)


def load_checkpoint(path: str | Path, expected_arch: str | None = None) -> Model:
    """Rebuild a model from a checkpoint; forward outputs are bit-identical
    to the saved model's."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    required = {"format_version", "arch", "config", "init_seed", "epoch", "state_dict"}
    if not isinstance(payload, dict) or not required.issubset(payload):
        raise CheckpointError(f"checkpoint {path} is missing fields")
    if payload["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {payload['format_version']!r}")
    cfg_dict = dict(payload["config"])
    cfg_dict["filters"] = tuple(cfg_dict.get("filters", ()))
    config = ModelConfig(**cfg_dict)
    if config.arch != payload["arch"]:
        raise CheckpointError(f"arch tag {payload['arch']!r} does not match config {config.arch!r}")
    if expected_arch is not None and config.arch != expected_arch:
        raise CheckpointError(f"expected arch {expected_arch!r}, checkpoint holds {config.arch!r}")
    module = _BUILDERS[config.arch](config)
    try:
        module.load_state_dict(payload["state_dict"])
    except RuntimeError as exc:
        raise CheckpointError(f"parameter mismatch in {path}: {exc}") from exc
    return Model(module=module, config=config, init_seed=int(payload["init_seed"]),
                 epoch=int(payload["epoch"]))
