"""Two-phase training orchestration.

Phase 1 trains the student with supervised BCE plus ramped mean-teacher and
CutMix consistency; the teacher tracks the student by EMA.  At the phase
boundary the training set is passed through the teacher once to initialize
the prototype pool by per-class K-means.  Phase 2 adds the prototype-guided
contrastive term over selectively sampled anchor frames while prototypes
keep moving with the teacher.

The whole run is a pure function of its config: corpus synthesis, weight
init, batch order, CutMix masks, reservoir sampling and K-means all draw
from one seeded generator, and checkpoints capture every piece of state
needed to resume bit-exactly.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from . import anchors as anchors_mod
from . import cutmix as cutmix_mod
from . import losses as losses_mod
from .anchors import STATUS_CODES
from .dataset import frame_targets, generate_corpus, weak_targets
from .evaluation import DecodingConfig, decode, event_f1, frame_f1
from .frontend import Waveform, waveform_to_logmel
from .losses import BatchLossReport, LossWeights, compose, l_clc, l_mt, l_pgc, l_sup, ramp
from .models import CRNN, ModelPair, NetworkConfig, flatten_params, load_flat_params
from .prototypes import FeatureBuffer, PrototypePool, collect

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class AblationFlags:
    lc: bool = True   # CutMix local consistency loss
    gc: bool = True   # prototype global consistency (phase 2)
    sas: bool = True  # selective anchor sampling (student gate)
    mp: bool = True   # multiple prototypes per class (else C = 1)


@dataclass
class RunConfig:
    # corpus
    n_strong: int = 40
    n_weak: int = 40
    n_unlabeled: int = 120
    n_val: int = 60
    n_classes: int = 3
    clip_len_s: float = 5.0
    sample_rate_hz: int = 16_000
    snr_db_lo: float = 6.0
    snr_db_hi: float = 14.0
    # frontend
    window_len: int = 2048
    hop_len: int = 256
    # model / losses
    net: NetworkConfig = field(default_factory=lambda: NetworkConfig(dtype="float32"))
    loss: LossWeights = field(default_factory=lambda: LossWeights(r_max_steps=0))
    clusters_per_class: int = 3
    prototype_momentum: float = 0.99
    # short desk-scale runs need a faster teacher than the 0.999 used for
    # full-corpus training, or the teacher never catches up to the student
    ema_decay: float = 0.99
    lr: float = 3e-3
    # schedule
    batch_strong: int = 5
    batch_weak: int = 5
    batch_unlabeled: int = 10
    epochs_phase1: int = 30
    epochs_phase2: int = 30
    eval_every: int = 5
    seed: int = 0
    # variants
    ablation: AblationFlags = field(default_factory=AblationFlags)
    supervised_only: bool = False
    # io
    out_dir: str = "runs/default"

    def __post_init__(self):
        if self.net.n_classes != self.n_classes:
            self.net = dataclasses.replace(self.net, n_classes=self.n_classes)
        if self.epochs_phase2 > 0 and not self.ablation.gc and self.loss.alpha != 0.0:
            # phase 2 without the prototype machinery degenerates to L1
            log.info("gc disabled: phase-2 epochs train with the phase-1 objective")

    @property
    def batch_total(self) -> int:
        return self.batch_strong + self.batch_weak + self.batch_unlabeled

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["net"]["conv_blocks"] = [list(b) for b in self.net.conv_blocks]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        net = dict(d.pop("net"))
        net["conv_blocks"] = tuple(tuple(b) for b in net["conv_blocks"])
        d["net"] = NetworkConfig(**net)
        d["loss"] = LossWeights(**d.pop("loss"))
        d["ablation"] = AblationFlags(**d.pop("ablation"))
        return cls(**d)


def parse_config_file(path) -> RunConfig:
    """Plain-text `key = value` config; dotted keys reach nested fields
    (e.g. `net.rnn_hidden = 16`, `ablation.lc = off`)."""
    cfg = RunConfig()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            _set_config_key(cfg, key, value, f"{path}:{lineno}")
    return cfg


def _set_config_key(cfg, key: str, value: str, where: str) -> None:
    obj = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        if not hasattr(obj, part):
            raise ValueError(f"{where}: unknown config section {part!r}")
        obj = getattr(obj, part)
    leaf = parts[-1]
    if not hasattr(obj, leaf):
        raise ValueError(f"{where}: unknown config key {key!r}")
    current = getattr(obj, leaf)
    if isinstance(current, bool):
        parsed = value.lower() in ("1", "true", "yes", "on")
    elif isinstance(current, int):
        parsed = int(value)
    elif isinstance(current, float):
        parsed = float(value)
    elif isinstance(current, tuple):
        parsed = tuple(tuple(int(x) for x in grp.split(",")) for grp in value.split(";"))
    else:
        parsed = value
    setattr(obj, leaf, parsed)


# ---------------------------------------------------------------------------
# Data preparation

@dataclass
class PreparedClip:
    clip_id: str
    status: int                    # anchors.STATUS_* code
    features: np.ndarray           # (T, F) log-mel
    targets: np.ndarray | None     # (T', M) for strong clips
    weak_target: np.ndarray | None  # (M,) for weak clips
    truth_events: list             # (class_id, onset_s, offset_s)


def prepare_clips(manifest, waveforms, cfg: RunConfig) -> list:
    out = []
    for clip in manifest.clips:
        feats = waveform_to_logmel(
            waveforms[clip.clip_id], cfg.window_len, cfg.hop_len, cfg.net.n_mels)
        t_out = cfg.net.pooled_frames(feats.shape[0])
        # crop to a multiple of the time-pool factor so CutMix masks map
        # exactly onto output frames
        feats = feats[:t_out * cfg.net.time_pool_total]
        # per-clip standardization keeps the network inputs well scaled
        feats = (feats - feats.mean()) / max(feats.std(), 1e-6)
        events = [(e.class_id, e.onset_s, e.offset_s) for e in clip.truth_events]
        targets = None
        weak = None
        if clip.label_status == "strong":
            targets = frame_targets(clip.truth_events, t_out, cfg.clip_len_s, cfg.n_classes)
        elif clip.label_status == "weak":
            weak = weak_targets(clip.annotation, cfg.n_classes)
        out.append(PreparedClip(
            clip_id=clip.clip_id,
            status=STATUS_CODES[clip.label_status],
            features=feats.astype(np.float64),
            targets=targets,
            weak_target=weak,
            truth_events=events,
        ))
    return out


class PoolCycler:
    """Shuffled cyclic sampler over one clip pool, with resumable state."""

    def __init__(self, indices, rng: np.random.Generator):
        self.indices = np.asarray(indices, dtype=np.int64)
        self.rng = rng
        self.perm = rng.permutation(self.indices) if self.indices.size else self.indices
        self.cursor = 0

    def draw(self, n: int) -> list:
        out = []
        while len(out) < n and self.indices.size:
            if self.cursor >= self.perm.size:
                self.perm = self.rng.permutation(self.indices)
                self.cursor = 0
            out.append(int(self.perm[self.cursor]))
            self.cursor += 1
        return out

    def state(self) -> dict:
        return {"perm": self.perm.copy(), "cursor": self.cursor}

    def load_state(self, state: dict) -> None:
        self.perm = np.asarray(state["perm"], dtype=np.int64)
        self.cursor = int(state["cursor"])


# ---------------------------------------------------------------------------
# Trainer

class TrainingDiverged(RuntimeError):
    pass


class Trainer:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.rng = np.random.Generator(np.random.PCG64(cfg.seed))
        self.dtype = cfg.net.torch_dtype

        manifest, waveforms = generate_corpus(
            cfg.n_strong, cfg.n_weak, cfg.n_unlabeled, cfg.n_classes,
            seed=cfg.seed, clip_len_s=cfg.clip_len_s,
            sample_rate_hz=cfg.sample_rate_hz,
            snr_db_range=(cfg.snr_db_lo, cfg.snr_db_hi))
        val_manifest, val_waveforms = generate_corpus(
            cfg.n_val, 0, 0, cfg.n_classes,
            seed=cfg.seed + 100_003, clip_len_s=cfg.clip_len_s,
            sample_rate_hz=cfg.sample_rate_hz,
            snr_db_range=(cfg.snr_db_lo, cfg.snr_db_hi))
        self.train_clips = prepare_clips(manifest, waveforms, cfg)
        self.val_clips = prepare_clips(val_manifest, val_waveforms, cfg)

        self.n_raw_frames = self.train_clips[0].features.shape[0]
        self.n_out_frames = cfg.net.pooled_frames(self.n_raw_frames)
        self.frame_duration_s = cfg.clip_len_s / self.n_out_frames

        self.pair = ModelPair.create(cfg.net, self.rng, ema_decay=cfg.ema_decay)
        self.optimizer = torch.optim.Adam(self.pair.student.parameters(), lr=cfg.lr)
        self.pool = PrototypePool(
            n_classes=cfg.n_classes,
            clusters_per_class=cfg.clusters_per_class if cfg.ablation.mp else 1,
            momentum=cfg.prototype_momentum)

        strong_idx = [i for i, c in enumerate(self.train_clips) if c.status == 0]
        weak_idx = [i for i, c in enumerate(self.train_clips) if c.status == 1]
        unl_idx = [i for i, c in enumerate(self.train_clips) if c.status == 2]
        if cfg.supervised_only:
            # same optimizer-step budget per epoch as the semi-supervised runs
            self.samplers = {"strong": PoolCycler(strong_idx, self.rng)}
            self.steps_per_epoch = max(1, math.ceil(len(self.train_clips) / cfg.batch_total))
        else:
            self.samplers = {
                "strong": PoolCycler(strong_idx, self.rng),
                "weak": PoolCycler(weak_idx, self.rng),
                "unlabeled": PoolCycler(unl_idx, self.rng),
            }
            self.steps_per_epoch = max(1, math.ceil(len(self.train_clips) / cfg.batch_total))

        self.r_max_steps = (cfg.loss.r_max_steps if cfg.loss.r_max_steps > 0
                            else self.steps_per_epoch * max(1, cfg.epochs_phase1 // 2))
        self.total_epochs = cfg.epochs_phase1 + cfg.epochs_phase2
        self.total_steps = self.total_epochs * self.steps_per_epoch
        self.global_step = 0
        self.best_frame_f1 = -1.0
        self._metrics_fh = None

    # -- bookkeeping ---------------------------------------------------

    @property
    def epoch(self) -> int:
        return self.global_step // self.steps_per_epoch

    @property
    def phase(self) -> str:
        in_phase2 = (self.epoch >= self.cfg.epochs_phase1
                     and self.cfg.epochs_phase2 > 0
                     and self.cfg.ablation.gc
                     and not self.cfg.supervised_only)
        return "L2" if in_phase2 else "L1"

    def _open_metrics(self):
        if self._metrics_fh is None:
            os.makedirs(self.cfg.out_dir, exist_ok=True)
            self._metrics_fh = open(os.path.join(self.cfg.out_dir, "metrics.jsonl"), "a")
        return self._metrics_fh

    def log_record(self, record: dict) -> None:
        fh = self._open_metrics()
        fh.write(json.dumps(record, sort_keys=True) + "\n")
        fh.flush()

    def close(self):
        if self._metrics_fh is not None:
            self._metrics_fh.close()
            self._metrics_fh = None

    # -- batches ---------------------------------------------------------

    def _draw_batch(self) -> list:
        cfg = self.cfg
        if cfg.supervised_only:
            # same strong-clip quota per step as the semi-supervised runs
            idxs = self.samplers["strong"].draw(cfg.batch_strong)
        else:
            idxs = (self.samplers["strong"].draw(cfg.batch_strong)
                    + self.samplers["weak"].draw(cfg.batch_weak)
                    + self.samplers["unlabeled"].draw(cfg.batch_unlabeled))
        return [self.train_clips[i] for i in idxs]

    def _stack_features(self, clips) -> torch.Tensor:
        x = np.stack([c.features for c in clips])
        return torch.as_tensor(x, dtype=self.dtype)

    # -- phase transition --------------------------------------------------

    def transition_to_phase2(self) -> None:
        """Full teacher pass over the training set, then offline K-means init."""
        cfg = self.cfg
        buf = FeatureBuffer(cfg.n_classes)
        with torch.no_grad():
            for start in range(0, len(self.train_clips), cfg.batch_total):
                chunk = self.train_clips[start:start + cfg.batch_total]
                out = self.pair.teacher(self._stack_features(chunk))
                p = out.probs.cpu().numpy().reshape(-1, cfg.n_classes)
                v = out.projections.cpu().numpy().reshape(-1, cfg.net.projection_dim)
                collect(p, v, cfg.loss.tau_plus, buf, self.rng)
        self.pool.init_offline(buf, self.rng, projection_dim=cfg.net.projection_dim)
        self.log_record({"type": "transition", "step": self.global_step,
                         "buffer_counts": buf.counts()})

    # -- one training step -------------------------------------------------

    def train_one_step(self) -> BatchLossReport:
        cfg = self.cfg
        if (self.phase == "L2" and not self.pool.initialized):
            self.transition_to_phase2()
        phase = self.phase
        batch = self._draw_batch()
        x = self._stack_features(batch)
        student_out = self.pair.student(x)

        # supervised term
        strong_rows, strong_tgts = [], []
        weak_rows, weak_tgts = [], []
        for b, clip in enumerate(batch):
            if clip.status == 0:
                strong_rows.append(student_out.probs[b])
                strong_tgts.append(torch.as_tensor(clip.targets, dtype=self.dtype))
            elif clip.status == 1:
                weak_rows.append(student_out.probs[b].max(dim=0).values)
                weak_tgts.append(torch.as_tensor(clip.weak_target, dtype=self.dtype))
        sup = l_sup(
            torch.stack(strong_rows) if strong_rows else None,
            torch.stack(strong_tgts) if strong_tgts else None,
            torch.stack(weak_rows) if weak_rows else None,
            torch.stack(weak_tgts) if weak_tgts else None,
        )

        r = ramp(self.global_step, self.r_max_steps)
        report = BatchLossReport(ramp=r)

        if cfg.supervised_only:
            total = sup
            mt_val = clc_val = pgc_val = 0.0
        else:
            with torch.no_grad():
                teacher_out = self.pair.teacher(x)
            mt_val = l_mt(student_out.probs, teacher_out.probs)

            need_mixed = cfg.ablation.lc or (phase == "L2")
            clc_val = 0.0
            pgc_val = 0.0
            if need_mixed:
                sigma = cutmix_mod.shuffle_pairing(len(batch), self.rng)
                masks = [cutmix_mod.sample_mask(self.n_raw_frames, self.n_out_frames,
                                                self.rng, partner=int(sigma[i]))
                         for i in range(len(batch))]
                p_teacher = teacher_out.probs.cpu().numpy()
                x_np = x.cpu().numpy()
                x_mixed = np.stack([
                    cutmix_mod.cutmix_spec(x_np[i], x_np[sigma[i]], masks[i])
                    for i in range(len(batch))])
                p_t_mixed = np.stack([
                    cutmix_mod.cutmix_pred(p_teacher[i], p_teacher[sigma[i]], masks[i])
                    for i in range(len(batch))])
                student_mixed = self.pair.student(torch.as_tensor(x_mixed, dtype=self.dtype))
                if cfg.ablation.lc:
                    clc_val = l_clc(student_mixed.probs,
                                    torch.as_tensor(p_t_mixed, dtype=self.dtype))

            if phase == "L2":
                # online prototype iteration from the teacher on originals
                self.pool.step(
                    teacher_out.probs.cpu().numpy().reshape(-1, cfg.n_classes),
                    teacher_out.projections.cpu().numpy().reshape(-1, cfg.net.projection_dim),
                    cfg.loss.tau_plus, self.rng)
                statuses = np.stack([
                    anchors_mod.mixed_frame_statuses(
                        batch[i].status, batch[sigma[i]].status, masks[i].m_pooled)
                    for i in range(len(batch))])
                anchor_set = anchors_mod.select(
                    p_t_mixed,
                    student_mixed.probs.detach().cpu().numpy(),
                    statuses, cfg.loss.tau_plus, cfg.loss.tau_minus,
                    use_student_gate=cfg.ablation.sas)
                report.anchors_selected = anchor_set.n_selected
                report.anchor_fraction = anchor_set.selection_fraction
                if anchor_set.n_selected and cfg.ablation.gc:
                    flat_mask = torch.as_tensor(anchor_set.frame_mask.reshape(-1))
                    v_flat = student_mixed.projections.reshape(-1, cfg.net.projection_dim)
                    p_rows = torch.as_tensor(
                        p_t_mixed.reshape(-1, cfg.n_classes)[anchor_set.frame_mask.reshape(-1)],
                        dtype=self.dtype)
                    protos = torch.as_tensor(self.pool.prototypes, dtype=self.dtype)
                    pgc_val = l_pgc(v_flat[flat_mask], p_rows, protos,
                                    cfg.loss.gamma, cfg.loss.tau_plus)

            total = compose(sup, mt_val, clc_val, pgc_val, r, cfg.loss.alpha, phase)

        total_val = float(total.detach())
        if not math.isfinite(total_val):
            self._dump_diagnostics(report, sup, mt_val, clc_val, pgc_val)
            raise TrainingDiverged(f"non-finite loss at step {self.global_step}")

        self.optimizer.zero_grad()
        total.backward()
        self.optimizer.step()
        self.pair.ema_update()

        report.l_sup = float(sup.detach())
        report.l_mt = float(mt_val.detach()) if torch.is_tensor(mt_val) else mt_val
        report.l_clc = float(clc_val.detach()) if torch.is_tensor(clc_val) else clc_val
        report.l_pgc = float(pgc_val.detach()) if torch.is_tensor(pgc_val) else pgc_val
        report.total = total_val

        self.log_record({"type": "step", "step": self.global_step,
                         "epoch": self.epoch, "phase": phase, **report.as_dict()})
        self.global_step += 1
        return report

    def _dump_diagnostics(self, report, *components) -> None:
        os.makedirs(self.cfg.out_dir, exist_ok=True)
        dump = {
            "step": self.global_step,
            "components": [float(c.detach()) if torch.is_tensor(c) else float(c)
                           for c in components],
            "report": report.as_dict(),
        }
        with open(os.path.join(self.cfg.out_dir, "diagnostic.json"), "w") as fh:
            json.dump(dump, fh, indent=2)

    # -- evaluation ----------------------------------------------------------

    def _forward_clips(self, clips, model: CRNN):
        """Batched no-grad forward; returns (probs, features, projections) numpy."""
        probs, feats, projs = [], [], []
        with torch.no_grad():
            for start in range(0, len(clips), self.cfg.batch_total):
                chunk = clips[start:start + self.cfg.batch_total]
                out = model(self._stack_features(chunk))
                probs.append(out.probs.cpu().numpy())
                feats.append(out.features.cpu().numpy())
                projs.append(out.projections.cpu().numpy())
        return (np.concatenate(probs), np.concatenate(feats), np.concatenate(projs))

    def evaluate(self, clips=None, decoding: DecodingConfig | None = None) -> dict:
        """Teacher-model scores on the validation split."""
        clips = self.val_clips if clips is None else clips
        decoding = decoding or DecodingConfig()
        probs, _, _ = self._forward_clips(clips, self.pair.teacher)
        all_targets = np.stack([c.targets for c in clips])
        frame_macro = frame_f1(probs.reshape(-1, self.cfg.n_classes),
                               all_targets.reshape(-1, self.cfg.n_classes),
                               decoding.threshold)
        # accumulate event counts clip by clip
        agg = {c: {"tp": 0, "fp": 0, "fn": 0} for c in range(self.cfg.n_classes)}
        for i, clip in enumerate(clips):
            pred_events = decode(probs[i], decoding, self.frame_duration_s)
            result = event_f1(pred_events, clip.truth_events)
            for c, stats in result["per_class"].items():
                for key in ("tp", "fp", "fn"):
                    agg[c][key] += stats[key]
        f1s = []
        for c, stats in agg.items():
            if stats["tp"] + stats["fp"] + stats["fn"] == 0:
                continue
            denom = 2 * stats["tp"] + stats["fp"] + stats["fn"]
            f1s.append(2 * stats["tp"] / denom if denom else 0.0)
        event_macro = float(np.mean(f1s)) if f1s else 0.0
        return {"frame_f1": frame_macro, "event_f1": event_macro}

    def export_embeddings(self, clips=None, model: CRNN | None = None):
        """Teacher frame features/projections plus frame targets for the
        validation split (or given clips).  Returns (Q, V, targets) with
        frames flattened across clips."""
        clips = self.val_clips if clips is None else clips
        model = model or self.pair.teacher
        probs, feats, projs = self._forward_clips(clips, model)
        targets = np.stack([c.targets for c in clips])
        m = self.cfg.n_classes
        return (feats.reshape(-1, feats.shape[-1]),
                projs.reshape(-1, projs.shape[-1]),
                targets.reshape(-1, m),
                probs.reshape(-1, m))

    # -- full run -------------------------------------------------------------

    def run(self) -> dict:
        cfg = self.cfg
        os.makedirs(cfg.out_dir, exist_ok=True)
        with open(os.path.join(cfg.out_dir, "config.json"), "w") as fh:
            json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        final = self.evaluate() if self.total_steps == 0 else None
        while self.global_step < self.total_steps:
            self.train_one_step()
            if self.global_step % self.steps_per_epoch == 0:
                epoch_done = self.global_step // self.steps_per_epoch
                if epoch_done % cfg.eval_every == 0 or epoch_done == self.total_epochs:
                    scores = self.evaluate()
                    self.log_record({"type": "eval", "epoch": epoch_done, **scores})
                    if scores["frame_f1"] > self.best_frame_f1:
                        self.best_frame_f1 = scores["frame_f1"]
                        self.save_checkpoint(os.path.join(cfg.out_dir, "best.ckpt.npz"))
                    final = scores
        if final is None:
            final = self.evaluate()
        self.save_checkpoint(os.path.join(cfg.out_dir, "last.ckpt.npz"))
        self.log_record({"type": "final", **final})
        self.close()
        return final

    # -- checkpointing -----------------------------------------------------

    def save_checkpoint(self, path) -> None:
        arrays = {
            "student": flatten_params(self.pair.student),
            "teacher": flatten_params(self.pair.teacher),
        }
        opt_state = self.optimizer.state_dict()["state"]
        for i, _ in enumerate(self.pair.student.parameters()):
            if i in opt_state:
                arrays[f"adam_{i}_exp_avg"] = opt_state[i]["exp_avg"].cpu().numpy()
                arrays[f"adam_{i}_exp_avg_sq"] = opt_state[i]["exp_avg_sq"].cpu().numpy()
                arrays[f"adam_{i}_step"] = np.asarray(float(opt_state[i]["step"]))
        if self.pool.prototypes is not None:
            arrays["prototypes"] = self.pool.prototypes
        for name, sampler in self.samplers.items():
            st = sampler.state()
            arrays[f"sampler_{name}_perm"] = st["perm"]
            arrays[f"sampler_{name}_cursor"] = np.asarray(st["cursor"])
        meta = {
            "version": CHECKPOINT_VERSION,
            "config": self.cfg.to_dict(),
            "global_step": self.global_step,
            "best_frame_f1": self.best_frame_f1,
            "pool_initialized": self.pool.initialized,
            "rng_state": self.rng.bit_generator.state,
            "sampler_names": list(self.samplers.keys()),
        }
        arrays["meta_json"] = np.frombuffer(
            json.dumps(meta).encode("utf-8"), dtype=np.uint8)
        np.savez(path, **arrays)

    @classmethod
    def resume(cls, path) -> "Trainer":
        data = np.load(path, allow_pickle=False)
        meta = json.loads(bytes(data["meta_json"]).decode("utf-8"))
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        trainer = cls(RunConfig.from_dict(meta["config"]))
        load_flat_params(trainer.pair.student, data["student"])
        load_flat_params(trainer.pair.teacher, data["teacher"])
        state_dict = trainer.optimizer.state_dict()
        new_state = {}
        for i, p in enumerate(trainer.pair.student.parameters()):
            key = f"adam_{i}_exp_avg"
            if key in data:
                new_state[i] = {
                    "step": torch.tensor(float(data[f"adam_{i}_step"])),
                    "exp_avg": torch.as_tensor(data[key], dtype=p.dtype),
                    "exp_avg_sq": torch.as_tensor(data[f"adam_{i}_exp_avg_sq"], dtype=p.dtype),
                }
        state_dict["state"] = new_state
        trainer.optimizer.load_state_dict(state_dict)
        if "prototypes" in data:
            trainer.pool.prototypes = np.asarray(data["prototypes"], dtype=np.float64)
        trainer.pool.initialized = bool(meta["pool_initialized"])
        for name in meta["sampler_names"]:
            trainer.samplers[name].load_state({
                "perm": data[f"sampler_{name}_perm"],
                "cursor": int(data[f"sampler_{name}_cursor"]),
            })
        trainer.rng.bit_generator.state = meta["rng_state"]
        trainer.global_step = int(meta["global_step"])
        trainer.best_frame_f1 = float(meta["best_frame_f1"])
        return trainer
