# Copyright 2026 The uavloc Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Reference forward pass of the fine-matching network.

Writes seeded random weights (one GLFT file per convolution plus
manifest.json), a gray test image and the network outputs, so the C++
implementation can be checked against torch:

    python tools/reference/fine_net_reference.py --out tests/data/fine_net
"""

import argparse
import json
import struct
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

LAYERS = [
    # name, in, out, kernel, stride, padding
    ("stage1.conv1", 1, 24, 3, 2, 1),
    ("stage1.conv2", 24, 24, 3, 2, 1),
    ("stage1.conv3", 24, 24, 3, 2, 1),
    ("stage2.conv", 24, 64, 3, 2, 1),
    ("stage3.conv", 64, 128, 3, 2, 1),
    ("lateral1", 24, 64, 1, 1, 0),
    ("lateral2", 64, 64, 1, 1, 0),
    ("lateral3", 128, 64, 1, 1, 0),
    ("fuse.conv1", 64, 64, 3, 1, 1),
    ("fuse.conv2", 64, 64, 1, 1, 0),
    ("reliability", 64, 1, 1, 1, 0),
    ("keypoint.0", 64, 64, 1, 1, 0),
    ("keypoint.1", 64, 64, 1, 1, 0),
    ("keypoint.2", 64, 64, 1, 1, 0),
    ("keypoint.3", 64, 65, 1, 1, 0),
]


def write_glft(path, array, metadata=None):
    array = np.ascontiguousarray(array, dtype="<f4")
    meta = b"" if metadata is None else json.dumps(metadata).encode("utf-8")
    with open(path, "wb") as f:
        f.write(b"GLFT")
        f.write(struct.pack("<HBB", 1, 0, array.ndim))
        f.write(struct.pack("<%dI" % array.ndim, *array.shape))
        f.write(struct.pack("<I", len(meta)))
        f.write(meta)
        f.write(array.tobytes())


class FineNet(nn.Module):
    def __init__(self):
        super().__init__()
        self.convs = nn.ModuleDict()
        for name, cin, cout, k, s, p in LAYERS:
            self.convs[name.replace(".", "_")] = nn.Conv2d(cin, cout, k, stride=s, padding=p)

    def conv(self, name, x, act):
        y = self.convs[name.replace(".", "_")](x)
        return F.relu(y) if act else y

    def forward(self, gray):
        s1 = self.conv("stage1.conv3", self.conv("stage1.conv2", self.conv("stage1.conv1", gray, True), True), True)
        s2 = self.conv("stage2.conv", s1, True)
        s3 = self.conv("stage3.conv", s2, True)
        size = s1.shape[-2:]
        fused = (self.conv("lateral1", s1, False)
                 + F.interpolate(self.conv("lateral2", s2, False), size=size, mode="bilinear", align_corners=False)
                 + F.interpolate(self.conv("lateral3", s3, False), size=size, mode="bilinear", align_corners=False))
        desc = self.conv("fuse.conv2", self.conv("fuse.conv1", fused, True), False)
        reliability = torch.sigmoid(self.conv("reliability", desc, False))
        k = F.pixel_unshuffle(gray, 8)
        for n in range(3):
            k = self.conv("keypoint.%d" % n, k, True)
        logits = self.conv("keypoint.3", k, False)
        return desc, reliability, logits


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--height", type=int, default=64)
    ap.add_argument("--width", type=int, default=96)
    args = ap.parse_args()

    torch.manual_seed(args.seed)
    net = FineNet().eval()
    weights = args.out / "weights"
    weights.mkdir(parents=True, exist_ok=True)
    manifest = {"layers": {}}
    for name, _, _, _, s, p in LAYERS:
        conv = net.convs[name.replace(".", "_")]
        file = name + ".glft"
        write_glft(weights / file, conv.weight.detach().numpy(),
                   {"stride": s, "padding": p, "bias": conv.bias.detach().tolist()})
        manifest["layers"][name] = file
    (weights / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    # smooth blobs plus a few hard edges, values in [0, 1]
    rng = np.random.default_rng(args.seed)
    yy, xx = np.mgrid[0:args.height, 0:args.width].astype(np.float32)
    img = 0.5 + 0.25 * np.sin(xx / 5.0 + rng.uniform(0, 6)) * np.cos(yy / 7.0 + rng.uniform(0, 6))
    img += 0.2 * ((xx // 16 + yy // 16) % 2) + 0.05 * rng.standard_normal(img.shape)
    img = np.clip(img, 0.0, 1.0).astype(np.float32)
    write_glft(args.out / "input.glft", img)

    with torch.no_grad():
        desc, rel, logits = net(torch.from_numpy(img)[None, None])
    write_glft(args.out / "descriptors.glft", desc[0].permute(1, 2, 0).numpy())
    write_glft(args.out / "reliability.glft", rel[0, 0].numpy())
    write_glft(args.out / "keypoint_logits.glft", logits[0].permute(1, 2, 0).numpy())


if __name__ == "__main__":
    main()
