"""服务包，包含Polya-Gamma EM系列求解器、变分贝叶斯、稀疏与多分类求解器以及数据管线。"""
