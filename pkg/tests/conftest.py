import numpy as np
import pytest

from fitroom import datasets, training
from fitroom.backends import OracleStore

RES = (64, 48)


@pytest.fixture(scope="session")
def samples64():
    return [datasets.synth_sample(i, RES) for i in range(8)]


@pytest.fixture(scope="session")
def oracle_store(samples64):
    return OracleStore.from_samples(samples64)


@pytest.fixture(scope="session")
def dataset64(samples64, tmp_path_factory):
    root = tmp_path_factory.mktemp("ds64")
    manifest = datasets.export_dataset(samples64, root, "train")
    return manifest


@pytest.fixture(scope="session")
def quick_ckpts(samples64, tmp_path_factory):
    """Two-step fixture checkpoints: valid shapes, untrained quality."""
    out = tmp_path_factory.mktemp("ckpts")
    cfg = training.TrainConfig.toy(seed=7, steps=2)
    res_c = training.train_condgen(cfg, samples64[:4])
    res_i = training.train_imggen(cfg, samples64[:4], res_c.checkpoint)
    cond_path = out / "condgen.ckpt"
    img_path = out / "imggen.ckpt"
    training.save_checkpoint(res_c.checkpoint, cond_path)
    training.save_checkpoint(res_i.checkpoint, img_path)
    return {"condgen": cond_path, "imggen": img_path}


@pytest.fixture(scope="session")
def toy_segmenter_net(samples64):
    """Trained toy parser; shared by the IoU test and backend benches."""
    from fitroom.backends import train_toy_segmenter

    train = [datasets.synth_sample(200 + i, RES) for i in range(24)]
    net, losses = train_toy_segmenter(train, steps=500, batch_size=4,
                                      width=16, seed=11)
    assert losses[-1] < losses[0]
    return net


def naive_warp(img: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Per-pixel reference warp: bilinear sample at (x+dx, y+dy), zero
    outside the frame. img is (H, W, C), flow is (H, W, 2)."""
    h, w, c = img.shape
    out = np.zeros((h, w, c))
    for y in range(h):
        for x in range(w):
            sx = x + flow[y, x, 0]
            sy = y + flow[y, x, 1]
            x0 = int(np.floor(sx))
            y0 = int(np.floor(sy))
            fx = sx - x0
            fy = sy - y0
            for xi, yi, wgt in ((x0, y0, (1 - fx) * (1 - fy)),
                                (x0 + 1, y0, fx * (1 - fy)),
                                (x0, y0 + 1, (1 - fx) * fy),
                                (x0 + 1, y0 + 1, fx * fy)):
                if 0 <= xi < w and 0 <= yi < h:
                    out[y, x] += wgt * img[yi, xi]
    return out
