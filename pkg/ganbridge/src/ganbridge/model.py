"""Small U-shaped generator and patch discriminator for desk-scale paired
image translation. The generator maps 3-channel images in [-1, 1] to the
same range; the discriminator scores (source, candidate) pairs patch-wise."""

import torch
from torch import nn


def _down(cin, cout, normalize=True):
    layers = [nn.Conv2d(cin, cout, 4, stride=2, padding=1, bias=not normalize)]
    if normalize:
        layers.append(nn.InstanceNorm2d(cout, affine=True))
    layers.append(nn.LeakyReLU(0.2, inplace=True))
    return nn.Sequential(*layers)


def _up(cin, cout):
    return nn.Sequential(
        nn.ConvTranspose2d(cin, cout, 4, stride=2, padding=1, bias=False),
        nn.InstanceNorm2d(cout, affine=True),
        nn.ReLU(inplace=True),
    )


class UNetGenerator(nn.Module):
    """Three-level encoder-decoder with skip connections."""

    def __init__(self, channels=32):
        super().__init__()
        c = channels
        self.down1 = _down(3, c, normalize=False)
        self.down2 = _down(c, 2 * c)
        self.down3 = _down(2 * c, 4 * c)
        self.bottleneck = nn.Sequential(
            nn.Conv2d(4 * c, 4 * c, 3, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
        )
        self.up3 = _up(4 * c, 2 * c)
        self.up2 = _up(4 * c, c)
        self.up1 = nn.Sequential(
            nn.ConvTranspose2d(2 * c, c, 4, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(c, 3, 3, padding=1),
            nn.Tanh(),
        )

    def forward(self, x):
        d1 = self.down1(x)
        d2 = self.down2(d1)
        d3 = self.down3(d2)
        b = self.bottleneck(d3)
        u3 = self.up3(b)
        u2 = self.up2(torch.cat([u3, d2], dim=1))
        return self.up1(torch.cat([u2, d1], dim=1))


class PatchDiscriminator(nn.Module):
    """Scores concatenated (source, candidate) pairs as a logit map."""

    def __init__(self, channels=32):
        super().__init__()
        c = channels
        self.net = nn.Sequential(
            _down(6, c, normalize=False),
            _down(c, 2 * c),
            _down(2 * c, 4 * c),
            nn.Conv2d(4 * c, 1, 3, padding=1),
        )

    def forward(self, source, candidate):
        return self.net(torch.cat([source, candidate], dim=1))
