import copy

import numpy as np
import pytest

from splitvae.core import (
    LatentStats,
    RngStream,
    bc_loss_grad,
    kl_loss_grad,
    reparametrize,
    reparametrize_backward,
    sgd_step,
    stack_backward,
    stack_forward,
)
from splitvae.core.losses import head_grad
from splitvae.errors import ConfigError, ModelStateError, ProtocolOrderError, TrainingError
from splitvae.services.edge_agent import EdgeAgent
from splitvae.services.server_agent import ServerAgent
from splitvae.services.trainer import batch_plan, generate_scenarios, train
from splitvae.settings import TrainConfig
from splitvae.transport import DEC_FP_SCATTER, InProcessBus, PayloadLedger, analytic_epoch_bytes, tensor_split


def _build(dims, embeds, cfg, rows, seed=0):
    data = np.random.default_rng(seed).uniform(0.0, 1.0, (rows, sum(dims)))
    bounds = np.cumsum([0, *dims])
    agents = [
        EdgeAgent.build(rank, data[:, bounds[rank - 1] : bounds[rank]], cfg, embeds[rank - 1])
        for rank in range(1, len(dims) + 1)
    ]
    server = ServerAgent.build({a.rank: a.embed_dim for a in agents}, cfg)
    return agents, server


def _monolithic_step(edge_encoders, edge_decoders, server_enc, server_dec, ys, eps, cfg):
    """Same model as one stacked graph with a single combined backward pass."""
    dims = [e.n_out for e in edge_encoders]
    x = np.hstack([stack_forward(enc, y) for enc, y in zip(edge_encoders, ys)])
    head = stack_forward(server_enc, x)
    stats = LatentStats.from_head(head, cfg.latent_dim)
    x_tilde = stack_forward(server_dec, reparametrize(stats, epsilon=eps))
    preds = [stack_forward(dec, part) for dec, part in zip(edge_decoders, tensor_split(x_tilde, dims))]

    dec_grads, errors = [], []
    for dec, pred, y in zip(edge_decoders, preds, ys):
        err, grads = stack_backward(dec, bc_loss_grad(pred, y))
        errors.append(err)
        dec_grads.append(grads)
    dz, g_theta = stack_backward(server_dec, np.hstack(errors))
    dmu, dls = reparametrize_backward(stats, dz)
    kmu, kls = kl_loss_grad(stats, cfg.kl_form)
    dx, g_phi = stack_backward(server_enc, head_grad(stats, head, dmu + kmu, dls + kls))
    enc_grads = [stack_backward(enc, d)[1] for enc, d in zip(edge_encoders, tensor_split(dx, dims))]

    for dec, g in zip(edge_decoders, dec_grads):
        sgd_step(dec.parameters(), g, cfg.lr_edge_dec)
    for enc, g in zip(edge_encoders, enc_grads):
        sgd_step(enc.parameters(), g, cfg.lr_edge_enc)
    sgd_step(server_dec.parameters(), g_theta, cfg.lr_server_dec)
    sgd_step(server_enc.parameters(), g_phi, cfg.lr_server_enc)


CASES = [([6], [3]), ([3, 5], [2, 4]), ([4, 7, 9], [3, 2, 4]), ([5, 5, 5, 5], [3, 3, 3, 3])]


@pytest.mark.parametrize("dims,embeds", CASES)
@pytest.mark.parametrize("batch", [1, 4])
@pytest.mark.parametrize("latent", [2, 4])
@pytest.mark.parametrize("threaded", [True, False])
def test_split_step_equals_monolithic_step(dims, embeds, batch, latent, threaded):
    cfg = TrainConfig(
        epochs=1,
        batch_size=batch,
        latent_dim=latent,
        edge_hidden=(5,),
        server_hidden=(6,),
        lr_edge_enc=0.3,
        lr_edge_dec=0.2,
        lr_server_enc=0.4,
        lr_server_dec=0.1,
        seed=11,
    )
    agents, server = _build(dims, embeds, cfg, rows=batch)
    eps = np.random.default_rng(99).standard_normal((batch, latent))
    server.freeze_noise(eps)

    encoders = [copy.deepcopy(a.encoder) for a in agents]
    decoders = [copy.deepcopy(a.decoder) for a in agents]
    server_enc = copy.deepcopy(server.encoder)
    server_dec = copy.deepcopy(server.decoder)
    ys = [a.silo.copy() for a in agents]

    train(agents, server, cfg, threaded=threaded, timeout=10.0)
    _monolithic_step(encoders, decoders, server_enc, server_dec, ys, eps, cfg)

    pairs = [(server.encoder, server_enc), (server.decoder, server_dec)]
    pairs += [(a.encoder, e) for a, e in zip(agents, encoders)]
    pairs += [(a.decoder, d) for a, d in zip(agents, decoders)]
    for split_stack, mono_stack in pairs:
        for p, q in zip(split_stack.parameters(), mono_stack.parameters()):
            np.testing.assert_allclose(p, q, rtol=0, atol=1e-9)


def test_raw_silo_data_never_crosses_the_bus():
    dims, embeds = [4, 7, 9], [3, 3, 3]
    cfg = TrainConfig(epochs=2, batch_size=5, latent_dim=2, edge_hidden=(6,), server_hidden=(8,))
    agents, server = _build(dims, embeds, cfg, rows=23)
    bus = InProcessBus(len(agents), record=True, timeout=10.0)
    train(agents, server, cfg, bus=bus)
    assert bus.envelopes
    for env in bus.envelopes:
        assert env.width == 3
        assert env.width not in dims


def test_ledger_equals_analytic_byte_count():
    dims, embeds = [4, 7, 9], [2, 3, 5]
    cfg = TrainConfig(epochs=3, batch_size=4, latent_dim=2, edge_hidden=(6,), server_hidden=(8,))
    agents, server = _build(dims, embeds, cfg, rows=18)
    result = train(agents, server, cfg)
    plan = batch_plan(18, 4)
    assert plan == [4, 4, 4, 4, 2]
    per_epoch = analytic_epoch_bytes(plan, embeds)
    assert result.ledger.total == 3 * per_epoch
    assert [result.ledger.epoch_total(e) for e in range(3)] == [per_epoch] * 3
    assert result.ledger.raw_bytes == 18 * sum(dims) * 8


def test_reduction_factor_grows_as_embeddings_shrink():
    factors = []
    for embed in (8, 4, 2):
        cfg = TrainConfig(epochs=1, batch_size=10, latent_dim=2, embed_dim=embed, edge_hidden=(6,), server_hidden=(8,))
        agents, server = _build([10, 10], [embed, embed], cfg, rows=40)
        ledger = train(agents, server, cfg).ledger
        factors.append(ledger.raw_bytes / ledger.epoch_total(0))
    assert factors[0] < factors[1] < factors[2]


def test_threaded_and_lockstep_runs_are_identical():
    cfg = TrainConfig(epochs=3, batch_size=6, latent_dim=3, edge_hidden=(6,), server_hidden=(8,), seed=5)
    results = []
    for threaded in (True, False):
        agents, server = _build([4, 7, 9], [3, 2, 4], cfg, rows=20, seed=2)
        result = train(agents, server, cfg, threaded=threaded)
        results.append((result.losses, [p.copy() for p in server.decoder.parameters()]))
    assert results[0][0] == results[1][0]
    for a, b in zip(results[0][1], results[1][1]):
        np.testing.assert_array_equal(a, b)


def test_losses_are_finite_and_edge_losses_logged():
    cfg = TrainConfig(epochs=4, batch_size=5, latent_dim=2, edge_hidden=(6,), server_hidden=(8,))
    agents, server = _build([3, 5], [2, 2], cfg, rows=20)
    result = train(agents, server, cfg)
    assert len(result.losses) == 4
    assert all(np.isfinite(r.total) for r in result.losses)
    assert len(result.edge_losses) == 4 * 2
    for epoch in range(4):
        per_rank = [row["bc_loss"] for row in result.edge_losses if row["epoch"] == epoch]
        # epoch BC is the mean over batches of the summed edge losses
        assert result.losses[epoch].bc_loss == pytest.approx(sum(per_rank))


def test_zero_epochs_leaves_parameters_unchanged():
    cfg = TrainConfig(epochs=0, batch_size=4, latent_dim=2, edge_hidden=(6,), server_hidden=(8,))
    agents, server = _build([3, 5], [2, 2], cfg, rows=8)
    before = [p.copy() for p in server.encoder.parameters()]
    result = train(agents, server, cfg)
    assert result.losses == []
    assert result.ledger.total == 0
    for a, b in zip(before, server.encoder.parameters()):
        np.testing.assert_array_equal(a, b)
    assert server.trained and all(a.trained for a in agents)


def test_batch_larger_than_data_is_a_config_error():
    cfg = TrainConfig(epochs=1, batch_size=50, latent_dim=2, edge_hidden=(6,), server_hidden=(8,))
    agents, server = _build([3, 5], [2, 2], cfg, rows=10)
    with pytest.raises(ConfigError):
        train(agents, server, cfg)


def test_edge_call_order_is_enforced():
    cfg = TrainConfig(latent_dim=2, edge_hidden=(6,), server_hidden=(8,))
    agents, _ = _build([3], [2], cfg, rows=4)
    with pytest.raises(ProtocolOrderError):
        agents[0].edge_dec_fp(InProcessBus(1))


def test_server_backward_before_forward():
    cfg = TrainConfig(latent_dim=2, edge_hidden=(6,), server_hidden=(8,))
    _, server = _build([3], [2], cfg, rows=4)
    with pytest.raises(ProtocolOrderError):
        server.vae_server_bp(InProcessBus(1))


def test_non_finite_data_aborts_training_with_context():
    cfg = TrainConfig(epochs=1, batch_size=2, latent_dim=2, edge_hidden=(6,), server_hidden=(8,))
    agents, server = _build([3, 4], [2, 2], cfg, rows=4)
    agents[1].encoder.layers[0].weights[:] = np.nan
    with pytest.raises(TrainingError) as err:
        train(agents, server, cfg, threaded=False)
    assert err.value.epoch == 0
    assert err.value.batch == 0


def test_generate_scenarios_shapes_and_state():
    cfg = TrainConfig(epochs=1, batch_size=4, latent_dim=2, edge_hidden=(6,), server_hidden=(8,))
    agents, server = _build([3, 5], [2, 2], cfg, rows=8)
    with pytest.raises(ModelStateError):
        generate_scenarios(agents, server, 5, RngStream(0, 0))
    train(agents, server, cfg)
    parts = generate_scenarios(agents, server, 7, RngStream(0, 0), original_units=False)
    assert [p.shape for p in parts] == [(7, 3), (7, 5)]
    assert all(((p >= 0) & (p <= 1)).all() for p in parts)
    empty = generate_scenarios(agents, server, 0, RngStream(0, 0))
    assert [p.shape for p in empty] == [(0, 3), (0, 5)]
    again = generate_scenarios(agents, server, 7, RngStream(0, 0), original_units=False)
    for a, b in zip(parts, again):
        np.testing.assert_array_equal(a, b)


def test_ledger_attached_to_external_bus_gets_raw_bytes():
    cfg = TrainConfig(epochs=1, batch_size=4, latent_dim=2, edge_hidden=(6,), server_hidden=(8,))
    agents, server = _build([3, 5], [2, 2], cfg, rows=8)
    bus = InProcessBus(2, ledger=PayloadLedger())
    result = train(agents, server, cfg, bus=bus)
    assert result.ledger is bus.ledger
    assert bus.ledger.raw_bytes == 8 * 8 * 8


def test_zero_head_server_starts_at_the_prior():
    cfg = TrainConfig(latent_dim=3, edge_hidden=(6,), server_hidden=(8,))
    agents, _ = _build([3, 5], [2, 4], cfg, rows=6)
    server = ServerAgent.build({a.rank: a.embed_dim for a in agents}, cfg, zero_head=True)
    bus = InProcessBus(2, timeout=5.0)
    for agent in agents:
        agent.edge_enc_fp(bus, 0, 3)
    kl = server.vae_server_fp(bus, 0, 0)
    assert kl == 0.0
    np.testing.assert_array_equal(server.stats.mu_hat, 0.0)
    np.testing.assert_array_equal(server.stats.sigma_hat, 1.0)
    parts = [bus.recv_scatter(a.rank, DEC_FP_SCATTER) for a in agents]
    assert [p.shape for p in parts] == [(3, 2), (3, 4)]
