"""Backbone construction and activation taps.

Each supported model has a checked-in mapping file translating the D1..D5
labels to concrete module names, plus the expected (H, W, C) of every tap
for a 224x224 input. Mismatching shapes abort the export: the downstream
dictionaries assume exactly these tensors.
"""

from __future__ import annotations

import json
from importlib import resources

from torch import nn
from torchvision import models as tv_models
from torchvision.models.resnet import Bottleneck, ResNet

# (H, W, C) per tap at the 224x224 reference input
EXPECTED_SHAPES = {
    "vggm": {
        "D1": (109, 109, 96), "D2": (26, 26, 256), "D3": (13, 13, 512),
    },
    "vgg16": {
        "D1": (224, 224, 64), "D2": (112, 112, 128), "D3": (56, 56, 256),
        "D4": (28, 28, 512), "D5": (14, 14, 512),
    },
    "googlenet": {
        "D1": (112, 112, 64), "D2": (56, 56, 192), "D3": (28, 28, 256),
        "D4": (14, 14, 528), "D5": (7, 7, 832),
    },
    "resnet50": {
        "D1": (112, 112, 64), "D2": (56, 56, 256), "D3": (28, 28, 512),
        "D4": (14, 14, 1024), "D5": (7, 7, 2048),
    },
}
for _twin in ("resnext50", "se_resnet50", "se_resnext50"):
    EXPECTED_SHAPES[_twin] = dict(EXPECTED_SHAPES["resnet50"])

MODELS = tuple(EXPECTED_SHAPES)


class ExporterError(Exception):
    pass


class VggM(nn.Module):
    """Five-conv medium VGG variant; taps at relu1, relu2, relu5."""

    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 96, 7, stride=2)
        self.relu1 = nn.ReLU(inplace=False)
        self.lrn1 = nn.LocalResponseNorm(5)
        self.pool1 = nn.MaxPool2d(3, 2, ceil_mode=True)
        self.conv2 = nn.Conv2d(96, 256, 5, stride=2, padding=1)
        self.relu2 = nn.ReLU(inplace=False)
        self.lrn2 = nn.LocalResponseNorm(5)
        self.pool2 = nn.MaxPool2d(3, 2, ceil_mode=True)
        self.conv3 = nn.Conv2d(256, 512, 3, padding=1)
        self.relu3 = nn.ReLU(inplace=False)
        self.conv4 = nn.Conv2d(512, 512, 3, padding=1)
        self.relu4 = nn.ReLU(inplace=False)
        self.conv5 = nn.Conv2d(512, 512, 3, padding=1)
        self.relu5 = nn.ReLU(inplace=False)

    def forward(self, x):
        x = self.pool1(self.lrn1(self.relu1(self.conv1(x))))
        x = self.pool2(self.lrn2(self.relu2(self.conv2(x))))
        x = self.relu3(self.conv3(x))
        x = self.relu4(self.conv4(x))
        return self.relu5(self.conv5(x))


class SqueezeExcite(nn.Module):
    def __init__(self, channels, reduction=16):
        super().__init__()
        hidden = max(channels // reduction, 1)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.fc = nn.Sequential(
            nn.Linear(channels, hidden), nn.ReLU(inplace=True),
            nn.Linear(hidden, channels), nn.Sigmoid())

    def forward(self, x):
        b, c, _, _ = x.shape
        scale = self.fc(self.pool(x).view(b, c)).view(b, c, 1, 1)
        return x * scale


class SEBottleneck(Bottleneck):
    """Bottleneck with channel recalibration on the residual branch."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.se = SqueezeExcite(self.conv3.out_channels)

    def forward(self, x):
        identity = x
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.relu(self.bn2(self.conv2(out)))
        out = self.se(self.bn3(self.conv3(out)))
        if self.downsample is not None:
            identity = self.downsample(x)
        return self.relu(out + identity)


def layer_mapping(model_name: str) -> dict:
    if model_name not in MODELS:
        raise ExporterError(
            f"unknown model {model_name!r}; expected one of {', '.join(MODELS)}")
    path = resources.files("afdt_exporter").joinpath(
        f"mappings/{model_name}.json")
    return json.loads(path.read_text())


def build_model(model_name: str, weights: str = "none") -> nn.Module:
    """Construct a backbone in eval mode.

    weights='none' uses the architecture with default initialization (shape
    conformance does not need trained weights); weights='pretrained' asks
    torchvision for its checkpoint and needs network access.
    """
    if weights not in ("none", "pretrained"):
        raise ExporterError(f"weights must be 'none' or 'pretrained', got {weights!r}")
    pretrained = weights == "pretrained"
    if model_name == "vggm":
        if pretrained:
            raise ExporterError("no published torchvision checkpoint for vggm")
        model = VggM()
    elif model_name == "vgg16":
        model = tv_models.vgg16(weights="IMAGENET1K_V1" if pretrained else None)
    elif model_name == "googlenet":
        kwargs = {} if pretrained else {"init_weights": True}
        model = tv_models.googlenet(
            weights="IMAGENET1K_V1" if pretrained else None,
            aux_logits=pretrained, **kwargs)
    elif model_name == "resnet50":
        model = tv_models.resnet50(weights="IMAGENET1K_V1" if pretrained else None)
    elif model_name == "resnext50":
        model = tv_models.resnext50_32x4d(
            weights="IMAGENET1K_V1" if pretrained else None)
    elif model_name == "se_resnet50":
        if pretrained:
            raise ExporterError("no published torchvision checkpoint for se_resnet50")
        model = ResNet(SEBottleneck, [3, 4, 6, 3])
    elif model_name == "se_resnext50":
        if pretrained:
            raise ExporterError("no published torchvision checkpoint for se_resnext50")
        model = ResNet(SEBottleneck, [3, 4, 6, 3], groups=32, width_per_group=4)
    else:
        raise ExporterError(f"unknown model {model_name!r}")
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model


class TapRecorder:
    """Forward hooks collecting activations for a set of D-labels."""

    def __init__(self, model: nn.Module, model_name: str, labels):
        mapping = layer_mapping(model_name)
        unknown = [l for l in labels if l not in mapping]
        if unknown:
            raise ExporterError(
                f"{model_name} has no taps for {unknown}; available: "
                f"{sorted(mapping)}")
        self.labels = tuple(labels)
        self.activations = {}
        self._handles = []
        for label in self.labels:
            module = model.get_submodule(mapping[label])
            self._handles.append(module.register_forward_hook(
                self._hook(label)))

    def _hook(self, label):
        def capture(_module, _inputs, output):
            self.activations[label] = output.detach()
        return capture

    def collect(self) -> dict:
        out = dict(self.activations)
        self.activations = {}
        return out

    def remove(self):
        for h in self._handles:
            h.remove()
        self._handles = []
