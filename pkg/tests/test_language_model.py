import pytest
import torch

from avemo.errors import ContextOverflow, DoubleMerge, EmptyInput, ShapeMismatch
from avemo.lm import (
    AUDIO,
    VISUAL,
    ByteTokenizer,
    DecodeConfig,
    DecoderConfig,
    DialogueModel,
    FeatureSegment,
    LoraAdapter,
    LoraConfig,
    MixedSequence,
    TextSegment,
    assemble_input,
    attach_lora,
    detach_lora,
    lora_apply,
    lora_merge,
    merge_lora,
)
from avemo.encoders import param_checksum

D_AUDIO, D_VISUAL = 12, 16


def tiny_model(d_model=32, n_layers=2, n_heads=2, context_len=256) -> DialogueModel:
    torch.manual_seed(0)
    tok = ByteTokenizer()
    cfg = DecoderConfig(
        d_model=d_model, n_layers=n_layers, n_heads=n_heads, vocab_size=tok.vocab_size, context_len=context_len
    )
    return DialogueModel(tok, cfg, d_audio=D_AUDIO, d_visual=D_VISUAL).eval()


def text_seq(model, text="hello world", target=False, context_len=256):
    tokens = tuple(model.tokenizer.encode(text))
    return MixedSequence((TextSegment(tokens, is_target=target),), context_len=context_len)


class TestTokenizer:
    def test_specials_never_from_text(self):
        tok = ByteTokenizer()
        weird = "emo_begin <bos> éÿ all bytes"
        assert all(t < 256 for t in tok.encode(weird))

    def test_roundtrip(self):
        tok = ByteTokenizer()
        text = "Hello, émotion!"
        assert tok.decode(tok.encode(text)) == text

    def test_specials_distinct(self):
        tok = ByteTokenizer()
        ids = [tok.token(name) for name in tok.specials]
        assert len(set(ids)) == len(ids)

    def test_serialization(self):
        tok = ByteTokenizer()
        assert ByteTokenizer.from_dict(tok.to_dict()) == tok


class TestMixedSequence:
    def test_mask_only_on_target_text(self):
        model = tiny_model()
        tok = model.tokenizer
        seq = assemble_input(
            tok,
            system_text="sys",
            f_a=torch.randn(5, D_AUDIO),
            f_v=torch.randn(3, D_VISUAL),
            target_tokens=tuple(tok.encode("ok")) + (tok.token("eos"),),
            context_len=256,
        )
        mask = seq.target_mask()
        # positions: 3 sys + 1 begin + 5 audio + 1 end + 1 begin + 3 visual + 1 end + 3 target
        assert seq.total_len == 18
        assert mask.sum().item() == 3
        assert mask[-3:].all()
        feature_rows = list(range(4, 9)) + list(range(11, 14))
        assert not mask[feature_rows].any()

    def test_audio_before_visual_by_default(self):
        model = tiny_model()
        seq = assemble_input(
            model.tokenizer, f_a=torch.randn(2, D_AUDIO), f_v=torch.randn(2, D_VISUAL), context_len=64
        )
        kinds = [s.kind for s in seq.segments if isinstance(s, FeatureSegment)]
        assert kinds == [AUDIO, VISUAL]
        flipped = assemble_input(
            model.tokenizer,
            f_a=torch.randn(2, D_AUDIO),
            f_v=torch.randn(2, D_VISUAL),
            context_len=64,
            audio_first=False,
        )
        kinds = [s.kind for s in flipped.segments if isinstance(s, FeatureSegment)]
        assert kinds == [VISUAL, AUDIO]

    def test_context_overflow(self):
        model = tiny_model()
        with pytest.raises(ContextOverflow):
            assemble_input(model.tokenizer, system_text="x" * 300, context_len=256)

    def test_needs_a_segment(self):
        with pytest.raises(EmptyInput):
            MixedSequence((), context_len=16)


class TestScore:
    def test_single_token_one_row(self):
        model = tiny_model()
        seq = MixedSequence((TextSegment((65,)),), context_len=16)
        rows = model.score(seq)
        assert rows.shape == (1, model.tokenizer.vocab_size)

    def test_rows_are_log_probs(self):
        model = tiny_model()
        rows = model.score(text_seq(model))
        assert torch.allclose(rows.exp().sum(dim=-1), torch.ones(rows.shape[0]), atol=1e-5)

    def test_causality_appending_token(self):
        model = tiny_model()
        seq = text_seq(model, "abcd")
        longer = text_seq(model, "abcde")
        a = model.score(seq)
        b = model.score(longer)
        assert torch.allclose(a, b[:4], atol=1e-6)

    def test_causality_perturbation(self):
        model = tiny_model()
        emb = model.embed_sequence(text_seq(model, "abcdefgh"))
        base = model.decoder.forward_embeddings(emb.unsqueeze(0))[0]
        t = 4
        perturbed = emb.clone()
        perturbed[t] += 1.0
        after = model.decoder.forward_embeddings(perturbed.unsqueeze(0))[0]
        # rows 0..t condition only on positions < t, so they cannot move
        assert torch.equal(base[: t + 1], after[: t + 1])
        assert not torch.allclose(base[t + 1 :], after[t + 1 :])

    def test_determinism(self):
        model = tiny_model()
        seq = text_seq(model)
        assert torch.equal(model.score(seq), model.score(seq))

    def test_batch_matches_single(self):
        model = tiny_model()
        seqs = [text_seq(model, "short"), text_seq(model, "a much longer input here")]
        log_probs, _, _ = model.score_batch(seqs)
        for i, seq in enumerate(seqs):
            single = model.score(seq)
            assert torch.allclose(log_probs[i, : seq.total_len], single, atol=1e-5)


class TestProjection:
    def test_shapes_preserved(self):
        model = tiny_model()
        out = model.project_features(torch.randn(50, D_AUDIO), AUDIO)
        assert out.shape == (50, 32)
        out = model.project_features(torch.randn(128, D_VISUAL), VISUAL)
        assert out.shape == (128, 32)

    def test_zero_matrix_gives_repeated_bias(self):
        model = tiny_model()
        out = model.project_features(torch.zeros(4, D_AUDIO), AUDIO)
        assert torch.allclose(out, model.audio_proj.bias.expand(4, -1))

    def test_empty_rejected(self):
        model = tiny_model()
        with pytest.raises(EmptyInput):
            model.project_features(torch.zeros(0, D_AUDIO), AUDIO)


class TestLoraFunctional:
    def test_hand_example(self):
        w = torch.eye(2)
        adapter = LoraAdapter(rank=1, alpha=1.0, a=torch.tensor([[1.0, 0.0]]), b=torch.tensor([[0.0], [1.0]]))
        out = lora_apply(torch.tensor([1.0, 0.0]), w, adapter)
        assert torch.equal(out, torch.tensor([1.0, 1.0]))

    def test_b_zero_is_identity(self):
        torch.manual_seed(1)
        w = torch.randn(6, 5)
        adapter = LoraAdapter.create(5, 6, rank=2)
        x = torch.randn(7, 5)
        assert torch.equal(lora_apply(x, w, adapter), x @ w.t())

    def test_merge_agrees_with_apply(self):
        torch.manual_seed(2)
        w = torch.randn(8, 8)
        adapter = LoraAdapter.create(8, 8, rank=3, alpha=6.0)
        adapter.b = torch.randn(8, 3) * 0.1
        merged = lora_merge(w, adapter)
        for _ in range(100):
            x = torch.randn(8)
            a = merged @ x
            b = lora_apply(x, w, adapter)
            assert (a - b).norm() / b.norm() <= 1e-5

    def test_b_zero_merge_bit_exact(self):
        w = torch.randn(4, 4)
        adapter = LoraAdapter.create(4, 4, rank=2)
        assert torch.equal(lora_merge(w, adapter), w)

    def test_double_merge_flagged(self):
        w = torch.randn(4, 4)
        adapter = LoraAdapter.create(4, 4, rank=2)
        lora_merge(w, adapter)
        with pytest.raises(DoubleMerge):
            lora_merge(w, adapter)

    def test_rank_zero_rejected(self):
        with pytest.raises(ShapeMismatch):
            LoraAdapter.create(4, 4, rank=0)


class TestLoraAttachment:
    def test_fresh_adapters_do_not_change_outputs(self):
        model = tiny_model()
        seq = text_seq(model)
        before = model.score(seq)
        attach_lora(model.decoder, LoraConfig(rank=4))
        after = model.score(seq)
        assert torch.equal(before, after)

    def test_detach_restores_bit_identical(self):
        model = tiny_model()
        checksum = param_checksum(model.decoder)
        attach_lora(model.decoder, LoraConfig(rank=4))
        with torch.no_grad():
            for name, p in model.decoder.named_parameters():
                if "lora_b" in name:
                    p.normal_()
        detach_lora(model.decoder)
        assert param_checksum(model.decoder) == checksum

    def test_merge_matches_runtime(self):
        model = tiny_model()
        seq = text_seq(model)
        attach_lora(model.decoder, LoraConfig(rank=4))
        with torch.no_grad():
            for name, p in model.decoder.named_parameters():
                if "lora_b" in name:
                    p.normal_(std=0.05)
        runtime = model.score(seq)
        merge_lora(model.decoder)
        merged = model.score(seq)
        assert torch.allclose(runtime, merged, atol=1e-5)


class TestGenerate:
    def test_max_new_zero(self):
        model = tiny_model()
        assert model.generate(text_seq(model), max_new=0) == []

    def test_greedy_deterministic(self):
        model = tiny_model()
        a = model.generate(text_seq(model), max_new=8)
        b = model.generate(text_seq(model), max_new=8)
        assert a == b
        assert len(a) <= 8

    def test_top_p_deterministic_given_seed(self):
        model = tiny_model()
        decode = DecodeConfig(mode="top_p", top_p=0.9, temperature=1.0, seed=13)
        a = model.generate(text_seq(model), decode=decode, max_new=8)
        b = model.generate(text_seq(model), decode=decode, max_new=8)
        assert a == b

    def test_generate_matches_score_argmax(self):
        model = tiny_model()
        seq = text_seq(model, "abc")
        first = model.generate(seq, max_new=1)[0]
        # next-token distribution = score of the extended sequence's last row
        ext = MixedSequence(seq.segments + (TextSegment((0,)),), context_len=seq.context_len)
        row = model.score(ext)[-1]
        assert first == int(row.argmax())

    def test_context_overflow(self):
        model = tiny_model()
        seq = text_seq(model, "x" * 256)  # fills the context exactly
        with pytest.raises(ContextOverflow):
            model.generate(seq, max_new=4)
