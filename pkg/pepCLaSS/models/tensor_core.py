# -*- coding: utf-8 -*-

"""
Dense tensor plumbing shared by the recurrent models: named parameter sets with Adam state, GRU/LSTM
layers written out gate by gate, masked cross-entropy, finite difference gradient checks and the CLSG
checkpoint container. Reverse-mode differentiation is delegated to torch autograd.
"""

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
import io
import json
import struct
from collections import OrderedDict

# Third party imports
import numpy as np
import torch
import torch.nn.functional as F

# Local imports
from pepCLaSS.common import *
from pepCLaSS.corpus import PAD

# ~~~~~~~~~~~~~~CONSTANTS~~~~~~~~~~~~~~#
CHECKPOINT_MAGIC = b"CLSG"
CHECKPOINT_VERSION = 1
DTYPES = {"float64": torch.float64, "float32": torch.float32}


def set_deterministic(threads=1):
    """Single intra-op thread: forward and backward passes are then bit reproducible"""
    torch.set_num_threads(threads)


def get_dtype(name):
    try:
        return DTYPES[name]
    except KeyError:
        raise ConfigError("Unsupported precision `{}`. Valid values: {}".format(name, ", ".join(DTYPES)))


# ~~~~~~~~~~~~~~PARAMETER SET~~~~~~~~~~~~~~#


class ParameterSet:
    def __init__(self, seed=0, dtype=torch.float64):
        """
        Named tensors owned by exactly one training loop, with their Adam first and second moments
        * seed
            Seed of the generator used by the init helpers
        * dtype
            torch dtype of the parameters
        """
        self.params = OrderedDict()
        self.m = OrderedDict()
        self.v = OrderedDict()
        self.step = 0
        self.dtype = dtype
        self.generator = torch.Generator().manual_seed(seed)

    # ~~~~~~~~~~~~~~MAGIC AND PROPERTY METHODS~~~~~~~~~~~~~~#

    def __getitem__(self, name):
        try:
            return self.params[name]
        except KeyError:
            raise ModelError("Missing parameter `{}`".format(name))

    def __contains__(self, name):
        return name in self.params

    def __iter__(self):
        for name in self.params:
            yield name

    def __len__(self):
        return len(self.params)

    def __repr__(self):
        return "ParameterSet({} tensors, {:,} values)".format(len(self), self.numel)

    def __getstate__(self):
        # torch generators cannot be pickled
        state = self.__dict__.copy()
        state["generator"] = None
        return state

    @property
    def numel(self):
        return sum(p.numel() for p in self.params.values())

    # ~~~~~~~~~~~~~~PUBLIC METHODS~~~~~~~~~~~~~~#

    def add(self, name, tensor):
        if name in self.params:
            raise ModelError("Duplicated parameter name `{}`".format(name))
        t = torch.as_tensor(tensor, dtype=self.dtype).clone().detach().requires_grad_(True)
        self.params[name] = t
        self.m[name] = torch.zeros_like(t, requires_grad=False)
        self.v[name] = torch.zeros_like(t, requires_grad=False)
        return t

    def init_matrix(self, name, shape):
        """Glorot uniform initialisation"""
        bound = np.sqrt(6.0 / (shape[0] + shape[-1]))
        t = (torch.rand(shape, generator=self.generator, dtype=torch.float64) * 2 - 1) * bound
        return self.add(name, t)

    def init_zeros(self, name, shape):
        return self.add(name, torch.zeros(shape, dtype=torch.float64))

    def check_shape(self, name, shape):
        if tuple(self[name].shape) != tuple(shape):
            raise ModelError(
                "Shape mismatch for `{}`: parameter {} vs declared {}".format(name, tuple(self[name].shape), tuple(shape))
            )

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def named_grads(self):
        return OrderedDict((name, p.grad) for name, p in self.params.items())

    def to_arrays(self, with_optimizer_state=True):
        """float64 numpy copies of the parameters (and Adam state) for the checkpoint container"""
        d = OrderedDict()
        for name, p in self.params.items():
            d[name] = p.detach().to(torch.float64).numpy().copy()
        if with_optimizer_state:
            for name in self.params:
                d["adam.m." + name] = self.m[name].to(torch.float64).numpy().copy()
                d["adam.v." + name] = self.v[name].to(torch.float64).numpy().copy()
            d["adam.step"] = np.array(float(self.step))
        return d

    @classmethod
    def from_arrays(cls, arrays, dtype=torch.float64, seed=0):
        ps = cls(seed=seed, dtype=dtype)
        for name, a in arrays.items():
            if not name.startswith("adam."):
                ps.add(name, torch.from_numpy(np.array(a, dtype=np.float64)))
        for name in ps.params:
            if "adam.m." + name in arrays:
                ps.m[name] = torch.as_tensor(arrays["adam.m." + name], dtype=dtype).clone()
                ps.v[name] = torch.as_tensor(arrays["adam.v." + name], dtype=dtype).clone()
        if "adam.step" in arrays:
            ps.step = int(arrays["adam.step"])
        return ps


# ~~~~~~~~~~~~~~OPTIMIZER~~~~~~~~~~~~~~#


def adam_update(params, grads=None, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
    """
    One Adam step with bias correction. All the gradients are checked before any parameter is touched,
    so a non-finite gradient leaves the parameter set unchanged.
    * grads
        Mapping name -> gradient. Defaults to the .grad slots filled by backward()
    """
    grads = grads if grads is not None else params.named_grads()
    for name in params:
        g = grads.get(name)
        if g is None:
            raise ModelError("Missing gradient for parameter `{}`".format(name))
        if not torch.isfinite(g).all():
            raise NonFiniteError("Non-finite gradient for parameter `{}`".format(name))

    b1, b2 = betas
    params.step += 1
    bc1 = 1 - b1 ** params.step
    bc2 = 1 - b2 ** params.step
    with torch.no_grad():
        for name, p in params.params.items():
            g = grads[name].to(p.dtype)
            params.m[name].mul_(b1).add_(g, alpha=1 - b1)
            params.v[name].mul_(b2).addcmul_(g, g, value=1 - b2)
            m_hat = params.m[name] / bc1
            v_hat = params.v[name] / bc2
            p.sub_(lr * m_hat / (v_hat.sqrt() + eps))
    return params


def clip_grad_norm(params, max_norm=5.0):
    """Rescale gradients in place to a global L2 norm of at most max_norm. Returns the norm before clipping"""
    grads = [p.grad for p in params.params.values() if p.grad is not None]
    if not grads:
        return 0.0
    total = torch.sqrt(sum((g.detach() ** 2).sum() for g in grads))
    if max_norm and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads:
            g.mul_(scale)
    return float(total)


# ~~~~~~~~~~~~~~LAYERS~~~~~~~~~~~~~~#


def embedding(params, name, ids):
    return params[name][torch.as_tensor(ids, dtype=torch.long)]


def linear(x, weight, bias=None):
    y = x @ weight.t()
    if bias is not None:
        y = y + bias
    return y


def dropout(x, p, generator, training=True):
    """Inverted dropout drawing its mask from an explicit generator"""
    if not training or p <= 0:
        return x
    keep = (torch.rand(x.shape, generator=generator, dtype=torch.float64) >= p).to(x.dtype)
    return x * keep / (1 - p)


def init_rnn(params, prefix, input_size, hidden_size, cell="gru", direction="forward"):
    """Register the weights of a GRU (3 gates) or LSTM (4 gates) layer"""
    n_gates = 3 if cell == "gru" else 4
    for d in _directions(direction):
        params.init_matrix("{}.{}.w_ih".format(prefix, d), (n_gates * hidden_size, input_size))
        params.init_matrix("{}.{}.w_hh".format(prefix, d), (n_gates * hidden_size, hidden_size))
        params.init_zeros("{}.{}.b_ih".format(prefix, d), (n_gates * hidden_size,))
        params.init_zeros("{}.{}.b_hh".format(prefix, d), (n_gates * hidden_size,))


def gru_cell(x, h, w_ih, w_hh, b_ih, b_hh):
    """
    r = s(W_ir x + b_ir + W_hr h + b_hr)
    z = s(W_iz x + b_iz + W_hz h + b_hz)
    n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
    h' = (1 - z) * n + z * h
    """
    gi = linear(x, w_ih, b_ih)
    gh = linear(h, w_hh, b_hh)
    i_r, i_z, i_n = gi.chunk(3, dim=-1)
    h_r, h_z, h_n = gh.chunk(3, dim=-1)
    r = torch.sigmoid(i_r + h_r)
    z = torch.sigmoid(i_z + h_z)
    n = torch.tanh(i_n + r * h_n)
    return (1 - z) * n + z * h


def lstm_cell(x, state, w_ih, w_hh, b_ih, b_hh):
    """Gates in (input, forget, cell, output) order"""
    h, c = state
    gates = linear(x, w_ih, b_ih) + linear(h, w_hh, b_hh)
    i, f, g, o = gates.chunk(4, dim=-1)
    c = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
    h = torch.sigmoid(o) * torch.tanh(c)
    return h, c


def gru_forward(params, inputs, direction="forward", hidden_size=None, prefix="gru", embedding_name="embedding", mask=None, h0=None):
    """
    Run a (bi)directional GRU over a batch.
    * inputs
        Token-id batch (B, T) embedded through `embedding_name`, or already embedded floats (B, T, I)
    * mask
        Boolean (B, T), False on padding. Hidden states are carried unchanged over masked steps so that the
        backward direction starts at the last real token
    Returns (outputs (B, T, hidden_size x directions), final states (directions, B, hidden_size))
    """
    return _rnn_forward(params, inputs, direction, hidden_size, prefix, embedding_name, mask, h0, cell="gru")


def lstm_forward(params, inputs, direction="forward", hidden_size=None, prefix="lstm", embedding_name="embedding", mask=None, h0=None):
    """Same contract as gru_forward with LSTM cells. The final states are the h part"""
    return _rnn_forward(params, inputs, direction, hidden_size, prefix, embedding_name, mask, h0, cell="lstm")


def _directions(direction):
    if direction == "forward":
        return ["fwd"]
    if direction == "backward":
        return ["bwd"]
    if direction == "bidirectional":
        return ["fwd", "bwd"]
    raise ConfigError("Invalid RNN direction `{}`".format(direction))


def _rnn_forward(params, inputs, direction, hidden_size, prefix, embedding_name, mask, h0, cell):
    inputs = torch.as_tensor(inputs)
    if not inputs.is_floating_point():
        if mask is None:
            mask = inputs != PAD
        inputs = embedding(params, embedding_name, inputs)
    B, T, I = inputs.shape
    n_gates = 3 if cell == "gru" else 4
    if hidden_size is None:
        hidden_size = params["{}.{}.w_hh".format(prefix, _directions(direction)[0])].shape[1]
    if hidden_size <= 0:
        raise ConfigError("hidden_size must be positive")
    if mask is None:
        mask = torch.ones(B, T, dtype=torch.bool)
    mask = torch.as_tensor(mask, dtype=torch.bool)

    outputs, finals = [], []
    for k, d in enumerate(_directions(direction)):
        w_ih, w_hh = params["{}.{}.w_ih".format(prefix, d)], params["{}.{}.w_hh".format(prefix, d)]
        b_ih, b_hh = params["{}.{}.b_ih".format(prefix, d)], params["{}.{}.b_hh".format(prefix, d)]
        params.check_shape("{}.{}.w_ih".format(prefix, d), (n_gates * hidden_size, I))
        params.check_shape("{}.{}.w_hh".format(prefix, d), (n_gates * hidden_size, hidden_size))

        h = h0[k] if h0 is not None else torch.zeros(B, hidden_size, dtype=inputs.dtype)
        c = torch.zeros_like(h)
        steps = range(T) if d == "fwd" else range(T - 1, -1, -1)
        out = [None] * T
        for t in steps:
            m = mask[:, t].unsqueeze(1)
            if cell == "gru":
                h_new = gru_cell(inputs[:, t], h, w_ih, w_hh, b_ih, b_hh)
            else:
                h_new, c_new = lstm_cell(inputs[:, t], (h, c), w_ih, w_hh, b_ih, b_hh)
                c = torch.where(m, c_new, c)
            h = torch.where(m, h_new, h)
            out[t] = h
        outputs.append(torch.stack(out, dim=1))
        finals.append(h)
    return torch.cat(outputs, dim=-1), torch.stack(finals, dim=0)


def masked_cross_entropy(logits, targets, reduction="mean"):
    """Token-level cross-entropy over non-PAD targets. `none` returns the (B, T) NLL grid (0 on padding)"""
    targets = torch.as_tensor(targets, dtype=torch.long)
    V = logits.shape[-1]
    nll = F.cross_entropy(logits.reshape(-1, V), targets.reshape(-1), ignore_index=PAD, reduction="none")
    nll = nll.reshape(targets.shape)
    if reduction == "none":
        return nll
    total = nll.sum()
    if reduction == "sum":
        return total
    count = (targets != PAD).sum()
    return total / count.clamp(min=1)


# ~~~~~~~~~~~~~~GRADIENT CHECK~~~~~~~~~~~~~~#


def grad_check(loss_fn, params, probe_count=20, seed=0, h=1e-4, floor=1e-2):
    """
    Compare autograd gradients with central finite differences on probe_count random coordinates.
    The relative error of a probe is |a - n| / max(|a|, |n|, floor)
    * loss_fn
        Callable without arguments returning a scalar loss computed from params
    Returns the max relative error over the probes
    """
    params.zero_grad()
    loss = loss_fn()
    if not torch.isfinite(loss):
        raise NonFiniteError("Non-finite loss in gradient check")
    loss.backward()

    names = list(params)
    sizes = np.array([params[n].numel() for n in names])
    rng = np.random.default_rng(seed)
    flat_idx = rng.choice(sizes.sum(), size=min(probe_count, sizes.sum()), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    max_err = 0.0
    for fi in sorted(flat_idx):
        k = int(np.searchsorted(offsets, fi, side="right") - 1)
        name = names[k]
        p = params[name]
        local = int(fi - offsets[k])
        grad = p.grad.reshape(-1)[local].item() if p.grad is not None else 0.0
        with torch.no_grad():
            flat = p.view(-1)
            orig = flat[local].item()
            flat[local] = orig + h
            f_plus = loss_fn().item()
            flat[local] = orig - h
            f_minus = loss_fn().item()
            flat[local] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NonFiniteError("Non-finite loss while probing `{}`".format(name))
        numeric = (f_plus - f_minus) / (2 * h)
        err = abs(grad - numeric) / max(abs(grad), abs(numeric), floor)
        max_err = max(max_err, err)
    params.zero_grad()
    return max_err


# ~~~~~~~~~~~~~~CHECKPOINT CONTAINER~~~~~~~~~~~~~~#


def save_checkpoint(fn, tensors, metadata):
    """
    Write named arrays and a metadata map. Layout: magic `CLSG`, uint32 version, uint32 metadata length,
    metadata JSON, uint32 tensor count, then per tensor: uint16 name length, name, uint8 ndim,
    uint32 x ndim shape, little-endian float64 values
    """
    mkbasedir(fn, exist_ok=True)
    meta = json.dumps(metadata, sort_keys=True, default=str).encode("utf-8")
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<II", CHECKPOINT_VERSION, len(meta)))
    buf.write(meta)
    buf.write(struct.pack("<I", len(tensors)))
    for name, a in tensors.items():
        a = np.asarray(a, dtype="<f8")
        bname = name.encode("utf-8")
        buf.write(struct.pack("<H", len(bname)))
        buf.write(bname)
        buf.write(struct.pack("<B", a.ndim))
        buf.write(struct.pack("<{}I".format(a.ndim), *a.shape))
        buf.write(np.ascontiguousarray(a).tobytes())
    with open(fn, "wb") as fp:
        fp.write(buf.getvalue())


def load_checkpoint(fn, expected_kind=None):
    """Read a CLSG container. Returns (OrderedDict name -> float64 array, metadata dict)"""
    check_readable(fn, "Checkpoint")
    with open(fn, "rb") as fp:
        data = fp.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ModelError("`{}` is not a checkpoint (bad magic bytes)".format(fn))
    try:
        version, meta_len = struct.unpack_from("<II", data, 4)
        if version != CHECKPOINT_VERSION:
            raise ModelError("Unsupported checkpoint version {} in `{}`".format(version, fn))
        pos = 12
        metadata = json.loads(data[pos : pos + meta_len].decode("utf-8"))
        pos += meta_len
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        tensors = OrderedDict()
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (ndim,) = struct.unpack_from("<B", data, pos)
            pos += 1
            shape = struct.unpack_from("<{}I".format(ndim), data, pos)
            pos += 4 * ndim
            n = int(np.prod(shape)) if ndim else 1
            if n == 0:
                tensors[name] = np.zeros(shape)
            else:
                tensors[name] = np.frombuffer(data, dtype="<f8", count=n, offset=pos).reshape(shape).copy()
            pos += 8 * n
    except (struct.error, ValueError) as E:
        raise ModelError("Truncated checkpoint `{}`: {}".format(fn, E))
    if expected_kind and metadata.get("kind") != expected_kind:
        raise ModelError("`{}` holds a `{}` checkpoint, expected `{}`".format(fn, metadata.get("kind"), expected_kind))
    return tensors, metadata
