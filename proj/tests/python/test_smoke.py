"""Smoke tests for the python bindings."""

import math

import pytest

import navpruner as nav


@pytest.fixture(scope="module")
def world_file():
    cfg = nav.WorldConfig()
    cfg.num_viewpoints = 40
    world = nav.generate_world(cfg, 123)
    ec = nav.EpisodeConfig()
    ec.num_episodes = 12
    wf = nav.WorldFile()
    wf.world = world
    wf.episodes = nav.generate_episodes(world, ec, 123)
    return wf


def test_world_generation(world_file):
    world = world_file.world
    assert world.num_viewpoints() == 40
    assert world.is_connected()
    ids = world.viewpoint_ids()
    assert ids == sorted(ids)
    for ep in world_file.episodes:
        length = nav.path_length(world, ep.reference_path)
        assert length == pytest.approx(nav.geodesic(world, ep.start, ep.goal))
        assert 8.0 <= length <= 20.0


def test_observation_rendering(world_file):
    world = world_file.world
    vp = world.viewpoint_ids()[0]
    obs = nav.render_observation(world, vp, 90.0)
    assert len(obs.sectors) == 8
    assert obs.text().startswith("You are in a ")
    presented = nav.full_presented(obs)
    assert sorted(presented.navigable()) == sorted(world.neighbors(vp))


def test_encoder_and_cosine():
    emb = nav.encode_text("walk Front to the kitchen")
    norm = math.sqrt(sum(x * x for x in emb))
    assert norm == pytest.approx(1.0, abs=1e-9)
    assert nav.encode_text("") == [0.0] * 256
    assert nav.cosine_sim(emb, emb) == pytest.approx(1.0, abs=1e-9)


def test_exemplar_memory(world_file):
    memory = nav.build_memory_from_oracle(world_file, cap=5, dim=128)
    assert 0 < len(memory) <= 5
    stored = memory.records[0].instruction
    top = nav.retrieve_exemplars(memory, stored, 3)
    assert top[0].instruction == stored
    block = nav.format_examples_block(top)
    assert block.startswith("Example 1:")


def test_training_and_pruning(world_file):
    examples = nav.make_training_examples(world_file.world, world_file.episodes)
    assert examples
    tc = nav.TrainingConfig()
    tc.encoder.dim = 64
    tc.hidden = 16
    tc.epochs = 2
    run = nav.train_retriever(examples, tc, 7)
    assert len(run.epoch_losses) == 2

    ep = world_file.episodes[0]
    obs = nav.render_observation(world_file.world, ep.start, ep.start_heading)
    scores = nav.score_directions(run.model, ep.instruction + "\n", obs)
    sel = nav.select_topk(scores, 5)
    pruned = nav.prune_observation(obs, sel)
    assert len(pruned.sectors) == len(sel.indices)
    assert set(pruned.navigable()) <= set(nav.full_presented(obs).navigable())


def test_oracle_run(world_file):
    cfg = nav.RunConfig()
    results = [
        nav.run_episode(world_file.world, ep, "oracle", config=cfg)
        for ep in world_file.episodes
    ]
    report = nav.compute_metrics(results, world_file.world, world_file.episodes)
    agg = report["aggregate"]
    assert agg["sr_pct"] == pytest.approx(100.0)
    assert agg["spl_mean"] == pytest.approx(1.0, abs=1e-9)


def test_run_split(world_file, tmp_path):
    path = tmp_path / "world.json"
    nav.save_world(world_file, str(path))
    report = nav.run_split([str(path)], "follower:0.0", jobs=4)
    assert report["aggregate"]["n"] == len(world_file.episodes)
    assert report["aggregate"]["sr_pct"] == pytest.approx(100.0)
