"""Tests for encoders, span classification, constrained decoding, checkpoints."""

import itertools
import json
import math
import struct
from pathlib import Path

import numpy as np
import pytest

import helpers
from lexprobe import autodiff as ad
from lexprobe import model as md
from lexprobe.embeddings import LayeredSequence
from lexprobe.errors import ConfigError, ContractError, FormatError, LabelError

rng = np.random.default_rng(77)


def const_seq(nodes_values):
    return [ad.constant(v) for v in nodes_values]


# --- schema -----------------------------------------------------------------


def test_schema_validation():
    with pytest.raises(ContractError):
        md.TaskSchema(labels=())
    with pytest.raises(ContractError):
        md.TaskSchema(labels=("a", "a"))
    with pytest.raises(ContractError):
        md.TaskSchema(labels=("O", "I"), tagging=True, span_arity=2)
    with pytest.raises(ContractError):
        md.TaskSchema(labels=("a",), span_arity=0)
    with pytest.raises(ContractError):
        md.TaskSchema(labels=("a",), span_arity=2, extra_arity=3)
    schema = md.TaskSchema(labels=("x", "y"))
    assert schema.label_index("y") == 1
    with pytest.raises(LabelError):
        schema.label_index("z")


def test_schema_round_trips_through_dict():
    schema = md.TaskSchema(labels=("O", "I", "B-X"), span_arity=0, extra_arity=0, tagging=True)
    assert md.TaskSchema.from_dict(schema.to_dict()) == schema


# --- encoders ----------------------------------------------------------------


def test_encoder_output_dims():
    assert md.encoder_output_dim(md.ENC_NONE, 7) == 7
    assert md.encoder_output_dim(md.ENC_BILSTM, 7) == 14
    assert md.encoder_output_dim(md.ENC_ATTENTION, 7) == 14
    with pytest.raises(ConfigError):
        md.encoder_output_dim("cnn", 7)


def test_encode_none_is_identity():
    vs = const_seq([rng.standard_normal(3) for _ in range(4)])
    out = md.encode_none(vs)
    assert out == vs and out is not vs
    with pytest.raises(ContractError):
        md.encode_none([])


def test_encode_none_gradient_passthrough():
    p = ad.Parameter("p", rng.standard_normal(3))
    q = ad.Parameter("q", rng.standard_normal(3))
    out = md.encode_none([p.node, q.node])
    ad.backward(ad.matmul(out[0], ad.constant(np.ones(3))))
    assert np.array_equal(p.grad, np.ones(3))
    assert np.array_equal(q.grad, np.zeros(3))


def ref_lstm(xs, gates):
    """Independent numpy LSTM: zero initial state, standard gate recurrences."""

    def sig(z):
        return 1.0 / (1.0 + np.exp(-z))

    d = xs[0].shape[0]
    h, c = np.zeros(d), np.zeros(d)
    outs = []
    for x in xs:
        pre = {g: gates[g][0].value @ x + gates[g][1].value @ h + gates[g][2].value
               for g in ("i", "f", "o", "c")}
        i, f, o = sig(pre["i"]), sig(pre["f"]), sig(pre["o"])
        c = f * c + i * np.tanh(pre["c"])
        h = o * np.tanh(c)
        outs.append(h)
    return outs


def test_bilstm_matches_reference_recurrence():
    d, n = 4, 5
    params = md.BiLSTMParams(d, np.random.default_rng(3))
    xs = [rng.standard_normal(d) for _ in range(n)]
    out = md.encode_bilstm(const_seq(xs), params)
    assert all(o.value.shape == (2 * d,) for o in out)
    fw = ref_lstm(xs, params.directions["fw"])
    bw = list(reversed(ref_lstm(list(reversed(xs)), params.directions["bw"])))
    for i in range(n):
        assert np.allclose(out[i].value[:d], fw[i], atol=1e-12)
        assert np.allclose(out[i].value[d:], bw[i], atol=1e-12)


def test_bilstm_zero_parameters_give_zero_states():
    params = md.BiLSTMParams(3, np.random.default_rng(0))
    for p in params.parameters():
        p.value[...] = 0.0
    out = md.encode_bilstm(const_seq([rng.standard_normal(3) for _ in range(4)]), params)
    for o in out:
        assert np.allclose(o.value, 0.0)


def test_bilstm_gradients():
    d, n = 4, 3
    params = md.BiLSTMParams(d, np.random.default_rng(11))
    xs = [rng.standard_normal(d) for _ in range(n)]
    w = rng.standard_normal(2 * d)

    def f():
        out = md.encode_bilstm(const_seq(xs), params)
        total = out[0]
        for o in out[1:]:
            total = ad.add(total, o)
        return ad.matmul(total, ad.constant(w))

    assert ad.gradient_error(f, params.parameters(), step=1e-4) < 1e-4


def test_attention_identical_tokens_attend_uniformly():
    v = rng.standard_normal(3)
    out = md.encode_attention(const_seq([v, v, v]))
    for o in out:
        assert np.allclose(o.value, np.concatenate([v, v]))


def test_attention_single_token_attends_to_itself():
    v = rng.standard_normal(4)
    (o,) = md.encode_attention(const_seq([v]))
    assert np.allclose(o.value, np.concatenate([v, v]))


def test_attention_orthonormal_inputs_follow_closed_form():
    n = 4
    basis = [np.eye(n)[i] for i in range(n)]
    out = md.encode_attention(const_seq(basis))
    e = math.e
    w_self = e / (e + n - 1)
    w_other = 1.0 / (e + n - 1)
    for i, o in enumerate(out):
        expected_ctx = w_self * basis[i] + w_other * sum(
            basis[j] for j in range(n) if j != i
        )
        assert np.allclose(o.value, np.concatenate([basis[i], expected_ctx]), atol=1e-12)


def test_attention_is_permutation_equivariant():
    xs = [rng.standard_normal(5) for _ in range(4)]
    out = md.encode_attention(const_seq(xs))
    perm = [2, 0, 3, 1]
    out_perm = md.encode_attention(const_seq([xs[i] for i in perm]))
    for k, i in enumerate(perm):
        assert np.allclose(out_perm[k].value, out[i].value, atol=1e-12)


def test_attention_gradients_flow_to_inputs():
    ps = [ad.Parameter(f"v{i}", rng.standard_normal(3)) for i in range(3)]
    w = rng.standard_normal(6)

    def f():
        out = md.encode_attention([p.node for p in ps])
        total = out[0]
        for o in out[1:]:
            total = ad.add(total, o)
        return ad.matmul(total, ad.constant(w))

    assert ad.gradient_error(f, ps, step=1e-4) < 1e-4


# --- span vector and classifier -----------------------------------------------


def test_span_vector_layouts():
    us = [rng.standard_normal(3) for _ in range(4)]
    u = const_seq(us)
    assert np.array_equal(md.span_vector(u, (1, 2)).value, np.concatenate([us[1], us[2]]))
    assert np.array_equal(md.span_vector(u, (2, 2)).value, us[2])
    ex = [rng.standard_normal(3) for _ in range(3)]
    got = md.span_vector(u, (0, 3), const_seq(ex))
    assert np.array_equal(got.value, np.concatenate([us[0], us[3], ex[0], ex[2]]))
    single = md.span_vector(u, (1, 1), const_seq(ex[:1]))
    assert np.array_equal(single.value, np.concatenate([us[1], ex[0]]))


def test_span_vector_bounds():
    u = const_seq([rng.standard_normal(2) for _ in range(3)])
    for span in [(-1, 0), (0, 3), (2, 1)]:
        with pytest.raises(IndexError):
            md.span_vector(u, span)
    with pytest.raises(ContractError):
        md.span_vector(u, (0, 1), [])


def test_classify_zero_output_weights_give_uniform():
    head = md.ClassifierHead(4, 3, np.random.default_rng(0))
    head.W.value[...] = 0.0
    dist = md.classify(head, ad.constant(rng.standard_normal(4)))
    assert np.allclose(dist.value, np.full(3, 1.0 / 3.0))


def test_classify_is_distribution_and_deterministic_in_eval():
    head = md.ClassifierHead(5, 4, np.random.default_rng(1))
    x = ad.constant(rng.standard_normal(5))
    a = md.classify(head, x).value
    b = md.classify(head, x).value
    assert abs(a.sum() - 1.0) < 1e-12
    assert np.array_equal(a, b)


def test_classify_contract_errors():
    head = md.ClassifierHead(5, 4, np.random.default_rng(1))
    with pytest.raises(ContractError):
        md.classify(head, ad.constant(rng.standard_normal(6)))
    with pytest.raises(ContractError):
        md.classify(head, ad.constant(rng.standard_normal(5)), train=True, rng=None)


def test_classify_train_mode_uses_dropout():
    head = md.ClassifierHead(5, 4, np.random.default_rng(1))
    x = ad.constant(rng.standard_normal(5))
    eval_dist = md.classify(head, x).value
    train_dists = [
        md.classify(head, x, train=True, rng=np.random.default_rng(s)).value
        for s in range(5)
    ]
    assert any(not np.allclose(d, eval_dist) for d in train_dists)


# --- constrained decoding --------------------------------------------------


def test_validate_tags():
    md.validate_tags(["O", "B-X", "I", "I", "O"])
    md.validate_tags(["B-X", "I"])
    for bad in (["I"], ["O", "I"], ["I", "B-X"]):
        with pytest.raises(ContractError):
            md.validate_tags(bad)
    with pytest.raises(ContractError):
        md.validate_tags(["B-Z"], inventory=("O", "I"))


def test_decode_never_starts_with_i():
    probs = np.array([[0.2, 0.7, 0.1]])
    assert md.decode_tags(probs, ("O", "I", "B-X")) == ["O"]


def test_decode_takes_detour_for_high_i_mass():
    # greedy per-position would pick O then be unable to take I
    probs = np.array([[0.6, 0.4, 0.0], [0.05, 0.05, 0.9]])
    assert md.decode_tags(probs, ("O", "B-X", "I")) == ["B-X", "I"]


def test_decode_contract_errors():
    with pytest.raises(ContractError):
        md.decode_tags(np.zeros((0, 2)), ("O", "I"))
    with pytest.raises(ContractError):
        md.decode_tags(np.ones((2, 3)) / 3, ("O", "I"))
    with pytest.raises(ContractError):
        md.decode_tags(np.ones((2, 1)), ("I",))


def brute_force_best_score(probs, inventory):
    n, T = probs.shape
    log_p = np.log(np.maximum(probs, 1e-300))
    best = -np.inf
    for combo in itertools.product(range(T), repeat=n):
        tags = [inventory[t] for t in combo]
        try:
            md.validate_tags(tags)
        except ContractError:
            continue
        best = max(best, sum(log_p[i, t] for i, t in enumerate(combo)))
    return best


INVENTORIES = [
    ("O", "I"),
    ("O", "B-X", "I"),
    ("O", "B-X", "B-Y", "I"),
    ("O", "B-COMP"),
]


def test_decode_matches_brute_force_on_200_cases():
    gen = np.random.default_rng(90125)
    for case in range(200):
        inventory = INVENTORIES[case % len(INVENTORIES)]
        n = int(gen.integers(1, 7))
        probs = gen.dirichlet(np.ones(len(inventory)), size=n)
        tags = md.decode_tags(probs, inventory)
        md.validate_tags(tags, inventory)
        log_p = np.log(np.maximum(probs, 1e-300))
        score = sum(log_p[i, inventory.index(t)] for i, t in enumerate(tags))
        assert score == pytest.approx(brute_force_best_score(probs, inventory), abs=1e-9)


def test_decode_always_valid_on_random_inputs():
    gen = np.random.default_rng(8)
    inventory = ("O", "B-X", "B-Y", "I")
    for _ in range(1000):
        n = int(gen.integers(1, 12))
        probs = gen.dirichlet(np.ones(4), size=n)
        tags = md.decode_tags(probs, inventory)
        md.validate_tags(tags, inventory)
        assert tags[0] != "I"


# --- the bound model -----------------------------------------------------------


SPAN_SCHEMA = md.TaskSchema(labels=("a", "b", "c"), span_arity=2, extra_arity=1)
TAG_SCHEMA = md.TaskSchema(labels=("O", "B-X", "I"), span_arity=0, extra_arity=0,
                           tagging=True)


def make_model(encoding, layer_mode, schema=SPAN_SCHEMA, dim=3, num_layers=2, seed=5):
    cfg = md.ModelConfig(dim=dim, num_layers=num_layers, encoding=encoding,
                         layer_mode=layer_mode, seed=seed)
    return md.ProbeModel(schema, cfg)


def random_seq(gen, n, num_layers=2, dim=3):
    return LayeredSequence([f"t{i}" for i in range(n)],
                           gen.standard_normal((num_layers, n, dim)))


def test_model_config_validation():
    with pytest.raises(ConfigError):
        make_model("cnn", "top")
    with pytest.raises(ConfigError):
        make_model("none", "middle")
    with pytest.raises(ConfigError):
        md.ProbeModel(SPAN_SCHEMA, md.ModelConfig(0, 1, "none", "top", 0))


def test_model_parameter_inventory():
    plain = make_model("none", "top")
    assert [p.name for p in plain.parameters()] == [
        "head.hidden.W", "head.hidden.b", "head.W"]
    mixed = make_model("bilstm", "all")
    names = [p.name for p in mixed.parameters()]
    assert names[0] == "scalar_mix.raw_weights" and names[1] == "scalar_mix.gamma"
    assert sum(n.startswith("bilstm.") for n in names) == 24
    assert mixed.head.input_dim == 3 * (2 * 3)  # (span 2 + extra 1) endpoints


def test_model_same_seed_same_initialization():
    a = make_model("bilstm", "all")
    b = make_model("bilstm", "all")
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert np.array_equal(pa.value, pb.value)


def test_model_tagging_and_span_modes_are_exclusive():
    span_model = make_model("none", "top")
    tag_model = make_model("none", "top", schema=TAG_SCHEMA)
    gen = np.random.default_rng(0)
    seq = random_seq(gen, 3)
    with pytest.raises(ContractError):
        span_model.tag_distributions(seq)
    with pytest.raises(ContractError):
        tag_model.distribution(seq, (0, 1))


@pytest.mark.parametrize("layer_mode", ["top", "all"])
@pytest.mark.parametrize("encoding", md.ENCODINGS)
def test_full_stack_gradients(encoding, layer_mode):
    gen = np.random.default_rng(314)
    model = make_model(encoding, layer_mode)
    seq = random_seq(gen, 4)
    extra = random_seq(gen, 1)
    helpers.widen_relu_margins(model, [helpers.classifier_input(model, seq, (1, 3), extra)])

    def f():
        return ad.cross_entropy(model.distribution(seq, (1, 3), extra), 1)

    params = model.parameters()
    coords = {p.name: list(range(min(4, p.value.size))) for p in params}
    assert ad.gradient_error(f, params, step=1e-4, coords=coords) < 1e-4
    assert ad.directional_gradient_error(f, params, gen, step=1e-4) < 1e-4


def test_tagging_stack_gradients():
    gen = np.random.default_rng(21)
    model = make_model("bilstm", "all", schema=TAG_SCHEMA)
    seq = random_seq(gen, 3)
    golds = [0, 1, 2]
    helpers.widen_relu_margins(model, helpers.token_inputs(model, seq))

    def f():
        dists = model.tag_distributions(seq)
        total = ad.cross_entropy(dists[0], golds[0])
        for d, g in zip(dists[1:], golds[1:]):
            total = ad.add(total, ad.cross_entropy(d, g))
        return ad.scale(total, 1.0 / len(golds))

    params = model.parameters()
    coords = {p.name: list(range(min(3, p.value.size))) for p in params}
    assert ad.gradient_error(f, params, step=1e-4, coords=coords) < 1e-4


def test_predict_label_and_tags_shapes():
    gen = np.random.default_rng(2)
    span_model = make_model("attention", "top")
    seq = random_seq(gen, 5)
    extra = random_seq(gen, 1)
    assert span_model.predict_label(seq, (0, 2), extra) in SPAN_SCHEMA.labels
    tag_model = make_model("none", "top", schema=TAG_SCHEMA)
    tags = tag_model.predict_tags(seq)
    assert len(tags) == 5
    md.validate_tags(tags, TAG_SCHEMA.labels)


# --- checkpoints -----------------------------------------------------------


def perturb(model, gen):
    for p in model.parameters():
        p.value[...] = gen.standard_normal(p.value.shape)


def test_checkpoint_round_trip(tmp_path):
    gen = np.random.default_rng(40)
    model = make_model("bilstm", "all")
    perturb(model, gen)
    path = tmp_path / "model.ckpt"
    md.save_checkpoint(str(path), model)
    loaded = md.load_checkpoint(str(path))
    assert loaded.config == model.config and loaded.schema == model.schema
    for p, q in zip(model.parameters(), loaded.parameters()):
        assert p.name == q.name
        assert np.array_equal(q.value, p.value.astype("<f4").astype(np.float64))
    seq = random_seq(np.random.default_rng(4), 4)
    extra = random_seq(np.random.default_rng(5), 1)
    a = model.distribution(seq, (0, 2), extra).value
    b = loaded.distribution(seq, (0, 2), extra).value
    assert np.allclose(a, b, atol=1e-5)


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"XXXX" + b"\x00" * 16)
    with pytest.raises(FormatError):
        md.load_checkpoint(str(path))


def test_checkpoint_truncated_block(tmp_path):
    model = make_model("none", "top")
    path = tmp_path / "model.ckpt"
    md.save_checkpoint(str(path), model)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(FormatError) as exc:
        md.load_checkpoint(str(path))
    assert "truncated" in str(exc.value)


def test_checkpoint_trailing_bytes(tmp_path):
    model = make_model("none", "top")
    path = tmp_path / "model.ckpt"
    md.save_checkpoint(str(path), model)
    with open(path, "ab") as fh:
        fh.write(b"\x00\x00")
    with pytest.raises(FormatError) as exc:
        md.load_checkpoint(str(path))
    assert "trailing" in str(exc.value)


def _rewrite_header(path, mutate):
    data = Path(path).read_bytes()
    version, blob_len = struct.unpack_from("<II", data, 4)
    header = json.loads(data[12:12 + blob_len].decode("utf-8"))
    mutate(header)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    Path(path).write_bytes(data[:4] + struct.pack("<II", version, len(blob))
                           + blob + data[12 + blob_len:])


def test_checkpoint_manifest_mismatches(tmp_path):
    model = make_model("none", "top")
    path = tmp_path / "model.ckpt"

    md.save_checkpoint(str(path), model)
    _rewrite_header(path, lambda h: h["params"][0].__setitem__("name", "nope"))
    with pytest.raises(FormatError) as exc:
        md.load_checkpoint(str(path))
    assert "manifest" in str(exc.value)

    md.save_checkpoint(str(path), model)
    _rewrite_header(path, lambda h: h["params"][0].__setitem__("shape", [1, 1]))
    with pytest.raises(FormatError):
        md.load_checkpoint(str(path))
