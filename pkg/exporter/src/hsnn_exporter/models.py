"""Toy encoders whose per-token states stand in for a trained system's.

Two architectures are supported. The recurrent encoder runs a two-layer
forward LSTM and a two-layer backward LSTM over the embedded tokens; its
hidden state per token is the concatenation of the two direction outputs
(or a single direction, when selected). The transformer encoder exposes its
top-layer output per token. Checkpoints are created with a fixed seed by
``init_checkpoint`` — training is out of scope here, the exporter only needs
a loadable, deterministic model.
"""

from __future__ import annotations

import math

import torch
from torch import nn


class CheckpointError(Exception):
    """Checkpoint missing, unreadable, or structurally wrong."""


class VocabularyMismatch(Exception):
    """Corpus token absent from the model vocabulary."""


RECURRENT = "recurrent"
TRANSFORMER = "transformer"

SELECTORS = {
    RECURRENT: ("concat", "forward", "backward"),
    TRANSFORMER: ("encoder-top",),
}


class RecurrentEncoder(nn.Module):
    def __init__(self, vocab_size: int, emb_dim: int, hidden_dim: int, layers: int = 2):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, emb_dim)
        self.forward_lstm = nn.LSTM(emb_dim, hidden_dim, num_layers=layers, batch_first=True)
        self.backward_lstm = nn.LSTM(emb_dim, hidden_dim, num_layers=layers, batch_first=True)
        self.hidden_dim = hidden_dim

    def states(self, token_ids: torch.Tensor, lengths: torch.Tensor) -> dict[str, torch.Tensor]:
        """Per-token direction outputs for a padded (batch, time) id tensor."""
        embedded = self.embedding(token_ids)
        packed = nn.utils.rnn.pack_padded_sequence(
            embedded, lengths, batch_first=True, enforce_sorted=False
        )
        fwd_out, _ = self.forward_lstm(packed)
        fwd, _ = nn.utils.rnn.pad_packed_sequence(fwd_out, batch_first=True)

        reversed_emb = torch.zeros_like(embedded)
        for b, length in enumerate(lengths.tolist()):
            reversed_emb[b, :length] = embedded[b, :length].flip(0)
        packed_rev = nn.utils.rnn.pack_padded_sequence(
            reversed_emb, lengths, batch_first=True, enforce_sorted=False
        )
        bwd_out, _ = self.backward_lstm(packed_rev)
        bwd_rev, _ = nn.utils.rnn.pad_packed_sequence(bwd_out, batch_first=True)
        bwd = torch.zeros_like(bwd_rev)
        for b, length in enumerate(lengths.tolist()):
            bwd[b, :length] = bwd_rev[b, :length].flip(0)

        return {"forward": fwd, "backward": bwd, "concat": torch.cat([fwd, bwd], dim=-1)}


class PositionalEncoding(nn.Module):
    def __init__(self, d_model: int, max_len: int = 4096):
        super().__init__()
        position = torch.arange(max_len).unsqueeze(1)
        div = torch.exp(torch.arange(0, d_model, 2) * (-math.log(10000.0) / d_model))
        pe = torch.zeros(max_len, d_model)
        pe[:, 0::2] = torch.sin(position * div)
        pe[:, 1::2] = torch.cos(position * div[: pe[:, 1::2].shape[1]])
        self.register_buffer("pe", pe)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.pe[: x.shape[1]]


class TransformerTextEncoder(nn.Module):
    def __init__(self, vocab_size: int, emb_dim: int, heads: int = 4, layers: int = 2):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, emb_dim)
        self.positional = PositionalEncoding(emb_dim)
        layer = nn.TransformerEncoderLayer(
            d_model=emb_dim, nhead=heads, dim_feedforward=4 * emb_dim, batch_first=True, dropout=0.0
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=layers)

    def states(self, token_ids: torch.Tensor, lengths: torch.Tensor) -> dict[str, torch.Tensor]:
        mask = torch.arange(token_ids.shape[1])[None, :] >= lengths[:, None]
        out = self.encoder(self.positional(self.embedding(token_ids)), src_key_padding_mask=mask)
        return {"encoder-top": out}


def init_checkpoint(
    path,
    vocab: list[str],
    model_type: str = RECURRENT,
    emb_dim: int = 16,
    hidden_dim: int = 8,
    seed: int = 0,
) -> None:
    """Create a deterministic, randomly initialized checkpoint."""
    if model_type not in SELECTORS:
        raise CheckpointError(f"unknown model type {model_type!r}")
    if len(set(vocab)) != len(vocab):
        raise CheckpointError("vocabulary contains duplicates")
    torch.manual_seed(seed)
    if model_type == RECURRENT:
        model = RecurrentEncoder(len(vocab), emb_dim, hidden_dim)
    else:
        model = TransformerTextEncoder(len(vocab), emb_dim)
    torch.save(
        {
            "model_type": model_type,
            "config": {"emb_dim": emb_dim, "hidden_dim": hidden_dim, "vocab_size": len(vocab)},
            "vocab": list(vocab),
            "state_dict": model.state_dict(),
        },
        path,
    )


def load_checkpoint(path):
    """(model in eval mode, vocab list, model_type, config) from a checkpoint file."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"cannot load checkpoint {path}: {exc}") from exc
    for key in ("model_type", "config", "vocab", "state_dict"):
        if key not in payload:
            raise CheckpointError(f"checkpoint {path} missing key {key!r}")
    model_type = payload["model_type"]
    config = payload["config"]
    vocab = payload["vocab"]
    if model_type == RECURRENT:
        model = RecurrentEncoder(len(vocab), config["emb_dim"], config["hidden_dim"])
    elif model_type == TRANSFORMER:
        model = TransformerTextEncoder(len(vocab), config["emb_dim"])
    else:
        raise CheckpointError(f"unknown model type {model_type!r}")
    try:
        model.load_state_dict(payload["state_dict"])
    except Exception as exc:
        raise CheckpointError(f"state dict does not fit the declared config: {exc}") from exc
    model.eval()
    return model, vocab, model_type, config
