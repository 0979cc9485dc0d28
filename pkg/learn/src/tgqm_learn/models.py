"""Small deterministic torch models predicting grasp viability and
normalized holding effort from a depth view plus the grasp parameters."""

import math

import numpy as np
import torch
from torch import nn

from .data import DataTooSmall, depth_to_cloud

MAX_PARAMS = 1_000_000
DEPTH_CLIP = 2.0                 # meters; background maps to this value


class RasterEncoder(nn.Module):
    """Convolutional encoder over the depth raster. Input channels are
    the clipped depth and a finite-pixel mask."""

    def __init__(self, out_dim=64):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(2, 8, 5, stride=4, padding=2), nn.ReLU(),
            nn.Conv2d(8, 16, 3, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(16, 32, 3, stride=2, padding=1), nn.ReLU(),
            nn.AdaptiveAvgPool2d(4), nn.Flatten(),
            nn.Linear(32 * 16, out_dim), nn.ReLU())

    def forward(self, x):
        return self.net(x)


class PointEncoder(nn.Module):
    """Shared per-point feature network with max pooling over the cloud."""

    def __init__(self, out_dim=64):
        super().__init__()
        self.point_net = nn.Sequential(
            nn.Linear(3, 32), nn.ReLU(),
            nn.Linear(32, out_dim), nn.ReLU())

    def forward(self, x):                      # (B, N, 3)
        return self.point_net(x).max(dim=1).values


class GraspModel(nn.Module):
    """Encoder over the view with late fusion of the grasp parameters
    (p0, d) into a fully connected head. kind is "classifier" (raw
    logits) or "regressor" (sigmoid output in [0, 1])."""

    def __init__(self, kind, encoder="raster", feat_dim=64, n_points=1024):
        super().__init__()
        if kind not in ("classifier", "regressor"):
            raise ValueError(f"unknown model kind {kind!r}")
        if encoder == "raster":
            self.encoder = RasterEncoder(feat_dim)
        elif encoder == "points":
            self.encoder = PointEncoder(feat_dim)
        else:
            raise ValueError(f"unknown encoder {encoder!r}")
        self.kind = kind
        self.encoder_type = encoder
        self.n_points = n_points
        self.head = nn.Sequential(
            nn.Linear(feat_dim + 8, 64), nn.ReLU(),
            nn.Linear(64, 1))
        n = sum(p.numel() for p in self.parameters())
        assert n <= MAX_PARAMS, f"model too large: {n} parameters"

    def forward(self, view, params):
        z = self.encoder(view)
        out = self.head(torch.cat([z, params], dim=1)).squeeze(1)
        return torch.sigmoid(out) if self.kind == "regressor" else out

    # -- featurization ----------------------------------------------------

    def featurize(self, samples):
        """Turn LearningSamples into (view, params) tensors."""
        params = torch.tensor(
            np.array([np.concatenate([s.p0, s.d]) for s in samples]),
            dtype=torch.float32)
        if self.encoder_type == "raster":
            views = []
            for s in samples:
                d = np.asarray(s.depth, dtype=np.float32)
                mask = np.isfinite(d)
                clipped = np.where(mask, np.minimum(d, DEPTH_CLIP),
                                   DEPTH_CLIP)
                views.append(np.stack([clipped, mask.astype(np.float32)]))
            view = torch.tensor(np.array(views))
        else:
            view = torch.tensor(
                np.array([depth_to_cloud(s.depth, n_points=self.n_points)
                          for s in samples]), dtype=torch.float32)
        return view, params

    def predict(self, samples, batch_size=256):
        """Scores for a list of samples: classifier probabilities or
        regressor outputs, as a numpy array."""
        self.eval()
        out = []
        with torch.no_grad():
            for i in range(0, len(samples), batch_size):
                view, params = self.featurize(samples[i:i + batch_size])
                y = self.forward(view, params)
                if self.kind == "classifier":
                    y = torch.sigmoid(y)
                out.append(y.numpy())
        return np.concatenate(out) if out else np.zeros(0)


def _seed_everything(seed):
    torch.manual_seed(seed)
    torch.set_num_threads(1)


def _train(model, samples, targets, loss_fn, epochs, batch_size, lr, seed):
    if len(samples) < 100:
        raise DataTooSmall(f"{len(samples)} training samples, need >= 100")
    _seed_everything(seed)
    view, params = model.featurize(samples)
    y = torch.tensor(np.asarray(targets, dtype=np.float32))
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    gen = torch.Generator().manual_seed(seed)
    model.train()
    last = math.inf
    for _ in range(epochs):
        order = torch.randperm(len(samples), generator=gen)
        total = 0.0
        for i in range(0, len(samples), batch_size):
            idx = order[i:i + batch_size]
            opt.zero_grad()
            pred = model(view[idx], params[idx])
            loss = loss_fn(pred, y[idx])
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
        last = total / len(samples)
    model.final_loss = last
    return model


def train_classifier(splits, encoder="raster", epochs=10, batch_size=64,
                     lr=1e-3, seed=0):
    """Train the viability classifier on the training split."""
    _seed_everything(seed)
    model = GraspModel("classifier", encoder)
    labels = [float(s.label) for s in splits.train]
    return _train(model, splits.train, labels,
                  nn.BCEWithLogitsLoss(), epochs, batch_size, lr, seed)


def train_regressor(splits, encoder="raster", epochs=10, batch_size=64,
                    lr=1e-3, seed=0):
    """Train the holding-effort regressor on the viable training samples
    (the only ones carrying a normalized target)."""
    _seed_everything(seed)
    model = GraspModel("regressor", encoder)
    train = [s for s in splits.train if s.target is not None]
    targets = [s.target for s in train]
    return _train(model, train, targets,
                  nn.MSELoss(), epochs, batch_size, lr, seed)
