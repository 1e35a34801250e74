"""The assembled dialogue system and its checkpoint format.

A :class:`DialogueSystem` bundles the speech encoder, face encoder,
decoder, and modality projections, and exposes the named parameter
groups the training stages freeze or train. Checkpoints are
directories: adapters are stored separately from base weights, and the
config records the prompt-set hash plus stage provenance.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from torch import nn

from avemo.encoders.common import named_param_checksum
from avemo.encoders.face import FaceEncoder, FaceEncoderConfig
from avemo.encoders.speech import SpeechEncoderConfig, TinySpeechEncoder
from avemo.errors import ConfigError
from avemo.lm.decoder import DecoderConfig
from avemo.lm.lora import LoraConfig, attach_lora, bias_and_norm_parameters, lora_parameters
from avemo.lm.model import DialogueModel
from avemo.lm.tokenizer import ByteTokenizer
from avemo.preprocessing.audio import MelConfig
from avemo.preprocessing.video import VideoConfig
from avemo.prompts import PROMPT_SET_HASH

CHECKPOINT_VERSION = 1

GROUPS = (
    "speech_encoder",
    "face_encoder.frame",
    "face_encoder.temporal",
    "face_encoder.queries",
    "projection.audio",
    "projection.visual",
    "decoder.base",
    "decoder.lora",
    "decoder.bias_norm",
)


@dataclass(frozen=True)
class SystemConfig:
    speech: SpeechEncoderConfig = field(default_factory=SpeechEncoderConfig)
    face: FaceEncoderConfig = field(default_factory=FaceEncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    mel: MelConfig = field(default_factory=MelConfig)
    video: VideoConfig = field(default_factory=VideoConfig)
    lora: LoraConfig = field(default_factory=LoraConfig)
    audio_first: bool = True

    @classmethod
    def tiny(cls) -> "SystemConfig":
        """Desk-scale profile: small dims everywhere, fast on a laptop CPU."""
        return cls(
            speech=SpeechEncoderConfig(d_audio=32, d_model=48, n_layers=1, n_heads=4),
            face=FaceEncoderConfig(
                d_frame=32, n_queries=16, d_visual=32, temporal_layers=2, temporal_heads=4
            ),
            decoder=DecoderConfig(d_model=128, n_layers=2, n_heads=4),
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lora"]["target_projections"] = list(self.lora.target_projections)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        try:
            return cls(
                speech=SpeechEncoderConfig(**data["speech"]),
                face=FaceEncoderConfig(**data["face"]),
                decoder=DecoderConfig(**data["decoder"]),
                mel=MelConfig(**data["mel"]),
                video=VideoConfig(**data["video"]),
                lora=LoraConfig(
                    rank=data["lora"]["rank"],
                    alpha=data["lora"]["alpha"],
                    target_projections=tuple(data["lora"]["target_projections"]),
                    train_bias_and_norm=data["lora"]["train_bias_and_norm"],
                ),
                audio_first=data.get("audio_first", True),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad system config: {exc}") from exc

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


class DialogueSystem(nn.Module):
    def __init__(self, cfg: SystemConfig, tokenizer: ByteTokenizer | None = None):
        super().__init__()
        self.cfg = cfg
        tokenizer = tokenizer or ByteTokenizer()
        self.speech_encoder = TinySpeechEncoder(cfg.speech)
        self.face_encoder = FaceEncoder(cfg.face)
        self.model = DialogueModel(tokenizer, cfg.decoder, cfg.speech.d_audio, cfg.face.d_visual)

    @property
    def tokenizer(self) -> ByteTokenizer:
        return self.model.tokenizer

    def encode_audio(self, mel) -> torch.Tensor:
        from avemo.encoders.speech import encode_speech

        return encode_speech(mel, self.speech_encoder)

    def encode_video(self, crops) -> torch.Tensor:
        return self.face_encoder.encode(crops)

    def group_parameters(self, group: str):
        """Named parameters of one group; adapter params never leak into base."""
        if group == "speech_encoder":
            return list(self.speech_encoder.named_parameters(prefix="speech_encoder"))
        if group == "face_encoder.frame":
            return list(self.face_encoder.frame.named_parameters(prefix="face_encoder.frame"))
        if group == "face_encoder.temporal":
            return list(self.face_encoder.temporal.named_parameters(prefix="face_encoder.temporal"))
        if group == "face_encoder.queries":
            return list(self.face_encoder.queries.named_parameters(prefix="face_encoder.queries"))
        if group == "projection.audio":
            return list(self.model.audio_proj.named_parameters(prefix="projection.audio"))
        if group == "projection.visual":
            return list(self.model.visual_proj.named_parameters(prefix="projection.visual"))
        if group == "decoder.base":
            # disjoint from the lora and bias_norm groups
            excluded = {n for n, _ in bias_and_norm_parameters(self.model.decoder)}
            return [
                (f"decoder.{n}", p)
                for n, p in self.model.decoder.named_parameters()
                if "lora_" not in n and n not in excluded
            ]
        if group == "decoder.lora":
            return [(f"decoder.{n}", p) for n, p in lora_parameters(self.model.decoder)]
        if group == "decoder.bias_norm":
            return [(f"decoder.{n}", p) for n, p in bias_and_norm_parameters(self.model.decoder)]
        raise ValueError(f"unknown group {group!r}")

    def group_checksum(self, group: str) -> str:
        return named_param_checksum(self.group_parameters(group))

    def shape_manifest(self) -> dict:
        return {
            group: {name: list(p.shape) for name, p in self.group_parameters(group)}
            for group in GROUPS
        }

    def has_adapters(self) -> bool:
        return any(True for _ in lora_parameters(self.model.decoder))

    def ensure_adapters(self, generator=None):
        if not self.has_adapters():
            attach_lora(self.model.decoder, self.cfg.lora, generator=generator)


def _split_decoder_state(decoder: nn.Module):
    base, adapters = {}, {}
    for name, tensor in decoder.state_dict().items():
        (adapters if "lora_" in name else base)[name] = tensor
    return base, adapters


def save_checkpoint(system: DialogueSystem, path: str | Path, provenance: dict | None = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    base, adapters = _split_decoder_state(system.model.decoder)
    torch.save(base, path / "decoder_base.pt")
    if adapters:
        torch.save(adapters, path / "adapters.pt")
    elif (path / "adapters.pt").exists():
        (path / "adapters.pt").unlink()
    torch.save(
        {"audio": system.model.audio_proj.state_dict(), "visual": system.model.visual_proj.state_dict()},
        path / "projections.pt",
    )
    torch.save(system.speech_encoder.state_dict(), path / "speech_encoder.pt")
    torch.save(system.face_encoder.state_dict(), path / "face_encoder.pt")
    info = {
        "version": CHECKPOINT_VERSION,
        "system": system.cfg.to_dict(),
        "tokenizer": system.tokenizer.to_dict(),
        "prompt_set_hash": PROMPT_SET_HASH,
        "config_hash": system.cfg.config_hash(),
        "shapes": system.shape_manifest(),
        "provenance": provenance or {},
    }
    (path / "config.json").write_text(json.dumps(info, indent=2, sort_keys=True))
    return path


def load_checkpoint(path: str | Path) -> tuple[DialogueSystem, dict]:
    path = Path(path)
    config_path = path / "config.json"
    if not config_path.exists():
        raise ConfigError(f"not a checkpoint directory: {path}")
    info = json.loads(config_path.read_text())
    if info.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {info.get('version')}")
    cfg = SystemConfig.from_dict(info["system"])
    tokenizer = ByteTokenizer.from_dict(info["tokenizer"])
    system = DialogueSystem(cfg, tokenizer)

    adapters_path = path / "adapters.pt"
    if adapters_path.exists():
        system.ensure_adapters()
        merged = torch.load(path / "decoder_base.pt", weights_only=True)
        merged.update(torch.load(adapters_path, weights_only=True))
        system.model.decoder.load_state_dict(merged)
    else:
        system.model.decoder.load_state_dict(torch.load(path / "decoder_base.pt", weights_only=True))

    projections = torch.load(path / "projections.pt", weights_only=True)
    system.model.audio_proj.load_state_dict(projections["audio"])
    system.model.visual_proj.load_state_dict(projections["visual"])
    system.speech_encoder.load_state_dict(torch.load(path / "speech_encoder.pt", weights_only=True))
    system.face_encoder.load_state_dict(torch.load(path / "face_encoder.pt", weights_only=True))
    system.eval()
    return system, info


def checkpoint_hash(path: str | Path) -> str:
    """Digest over every file in the checkpoint directory."""
    path = Path(path)
    h = hashlib.sha256()
    for f in sorted(p for p in path.iterdir() if p.is_file()):
        h.update(f.name.encode())
        h.update(f.read_bytes())
    return h.hexdigest()
