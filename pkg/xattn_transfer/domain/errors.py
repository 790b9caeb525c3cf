"""ドメイン共通の例外

CLI はこれらの型で終了コードを振り分けるため、新しい失敗種別は必ずここに追加する。
"""


class XAttnError(Exception):
    """本パッケージが送出する例外の基底クラス"""


class InvalidShapeError(XAttnError, ValueError):
    """テンソルの次元・形状が契約と一致しない"""


class DegenerateMaskError(XAttnError, ValueError):
    """マスクの選択画素が 2 未満で統計量が定義できない"""


class ConfigError(XAttnError, ValueError):
    """設定値・入力ファイル・スケジュールの指定が不正"""


class PlanError(XAttnError, ValueError):
    """AttentionPlan がカタログに存在しないレイヤーや欠けた特徴量を参照している"""


class InversionDegenerateError(XAttnError, RuntimeError):
    """反転中に σ_t = 0 となり注入ノイズを解けない"""


class BackboneError(XAttnError, RuntimeError):
    """デノイザーの構築・実行に失敗した (オプション依存の欠如を含む)"""
