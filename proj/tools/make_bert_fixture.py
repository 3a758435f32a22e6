"""Writes a tiny randomly initialised BERT checkpoint plus reference outputs.

The C++ contextual encoder is checked against these: last-layer hidden states
computed by the transformers BertModel in float64, and the slow BertTokenizer's
word pieces.

    python3 tools/make_bert_fixture.py tests/data/tiny_bert
"""

import json
import sys
from pathlib import Path

import torch
from transformers import BertConfig, BertModel, BertTokenizer

MARKERS = ["[S1]", "[/S1]", "[P1]", "[/P1]"]

WORDS = """the of and in to a is was were with for by on as that snp snps rs risk gene genes
associated association associ variant variants polymorphism allele alleles disease diseases
asthma obesity diabetes cancer breast type patients cohort study studies increased decreased
significant significantly genotype genotypes p not no evidence effect linked carriers ##s ##ed ##ing
##ism ##ly ##al ##ic ##1 ##2 ##3 ##4 ##5 ##6 ##7 ##8 ##9 ##0 1 2 3 4 5 6 7 8 9 0 crohn ' ( ) , . - ;
: = < > ##a ##e ##i ##o ##u ##n ##r ##t ##x b c d e f g h i j k l m n o q r s t u v w x y z
poly ##morph ##isms ##ic ##ma ##sity ##tes""".split()


def main(out_dir: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(1234)

    specials = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    vocab = specials + [w for w in dict.fromkeys(WORDS) if w not in specials] + MARKERS
    (out / "vocab.txt").write_text("\n".join(vocab) + "\n")
    (out / "tokenizer_config.json").write_text(json.dumps({"do_lower_case": True}) + "\n")

    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=16,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=24,
        max_position_embeddings=64,
        type_vocab_size=2,
        hidden_dropout_prob=0.0,
        attention_probs_dropout_prob=0.0,
    )
    model = BertModel(config, add_pooling_layer=False).eval()
    with torch.no_grad():
        # Non-trivial LayerNorm affine parameters so they are exercised.
        for name, p in model.named_parameters():
            if "LayerNorm" in name:
                p.add_(0.1 * torch.randn_like(p))
            elif name.endswith("bias"):
                p.copy_(0.05 * torch.randn_like(p))
    model.save_pretrained(out, safe_serialization=True)
    cfg = json.loads((out / "config.json").read_text())
    (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")

    tok = BertTokenizer(str(out / "vocab.txt"), do_lower_case=True)
    tok.add_special_tokens({"additional_special_tokens": MARKERS})
    texts = [
        "The SNP rs1234 was associated with asthma.",
        "[S1] rs7 [/S1] increased [P1] breast cancer [/P1] risk (p < 0.05).",
        "Polymorphisms in Crohn's disease cohorts",
        "unknownword zzzq",
    ]
    ref_model = BertModel.from_pretrained(out, attn_implementation="eager").double().eval()
    cases = []
    for text in texts:
        pieces = tok.tokenize(text)
        tokens = ["[CLS]"] + pieces + ["[SEP]"]
        ids = tok.convert_tokens_to_ids(tokens)
        with torch.no_grad():
            hidden = ref_model(input_ids=torch.tensor([ids])).last_hidden_state[0]
        cases.append({"text": text, "tokens": tokens, "ids": ids, "hidden": hidden.tolist()})
    (out / "expected.json").write_text(json.dumps({"cases": cases}, indent=1) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data/tiny_bert")
